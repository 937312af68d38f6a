# -*- coding: utf-8 -*-
import setuptools


with open("README.md") as f:

    readme = f.read()

with open("LICENSE.txt") as f:

    license = f.read()

setuptools.setup(
    name = "raeg",
    version = "0.1.0-alpha",
    description = "Protect images against unauthorized classifiers with reversible adversarial examples",
    long_description = readme,
    license = license,
    packages = ["raeg"],
    python_requires = ">=3.8",
    install_requires = [
        "torch>=1.10",
        "numpy",
        "scipy",
        "matplotlib",
        "Pillow",
        "scikit-image>=0.19",
    ],
    extras_require = {
        "test": ["pytest"],
        "docs": ["sphinx", "numpydoc"],
    },
    entry_points = {
        "console_scripts": ["raeg = raeg.cli:main"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
    ],
)
