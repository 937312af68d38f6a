from . import errors
from . import helpers
from . import config
from . import archive

from . import haar
from . import coupling
from . import generator

from . import differentiable_jpeg
from . import defense_simulation

from . import targets
from . import losses
from . import datasets

from . import training
from . import evaluation
from . import plotting
from . import cli
