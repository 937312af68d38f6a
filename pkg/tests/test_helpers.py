""" **test_helpers.py** tests **raeg/helpers.py**. """
import raeg
import pathlib
import tempfile
import torch


def test__mkdir_p__ci__():
    
    path = pathlib.Path(tempfile.mkdtemp())/"a"/"b"
    
    assert(raeg.helpers.mkdir_p(path) == path)
    
    assert(path.is_dir())
    
    raeg.helpers.mkdir_p(path)


def test__seed_everything__ci__():
    
    raeg.helpers.seed_everything(3)
    
    a = torch.rand(4)
    
    generator = raeg.helpers.seed_everything(3)
    
    assert(torch.equal(a, torch.rand(4)))
    
    assert(torch.equal(torch.rand(2, generator = generator), torch.rand(2, generator = torch.Generator().manual_seed(3))))


def test__select_device__ci__():
    
    assert(raeg.helpers.select_device("cpu") == torch.device("cpu"))
    
    assert(raeg.helpers.select_device("auto").type in ("cpu", "cuda"))


def test__freeze_and_digest__ci__():
    
    module = torch.nn.Linear(3, 2)
    
    digest = raeg.helpers.parameters_digest(module)
    
    raeg.helpers.freeze(module)
    
    assert(not module.training)
    
    assert(all(not p.requires_grad for p in module.parameters()))
    
    assert(raeg.helpers.parameters_digest(module) == digest)
    
    with torch.no_grad():
    
        module.bias.add_(1.)
    
    assert(raeg.helpers.parameters_digest(module) != digest)
