""" **helpers.py** contains a variety of small utilities shared by the other modules. """
import hashlib
import pathlib
import random
import numpy
import torch


def mkdir_p(pathstring):
    """ Make a directory if it doesn't exist.
    
    This is needed because `open` does not create directories.
    
    Parameters
    ----------
    path : string
    """
    path = pathlib.Path(pathstring)
    
    path.mkdir(parents = True, exist_ok = True)
    
    return path


def seed_everything(seed):
    """ Seed Python, NumPy and PyTorch, and return a `torch.Generator` seeded likewise. 
    
    RAEG passes explicit generators wherever randomness is drawn,
    but some PyTorch initializers only use the global state.
    """
    random.seed(seed)
    
    numpy.random.seed(seed % 2**32)
    
    torch.manual_seed(seed)
    
    generator = torch.Generator()
    
    generator.manual_seed(seed)
    
    return generator


def select_device(hint = None):
    """ Map a device hint ("cpu", "cuda", "cuda:1", "auto" or None) to a `torch.device`. """
    if (hint is None) or (hint == "auto"):
    
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    
    return torch.device(hint)


def parameters_digest(module):
    """ Return a SHA-256 hex digest of every tensor in `module.state_dict()`. 
    
    This is used to verify that frozen networks are left untouched.
    """
    digest = hashlib.sha256()
    
    for name, tensor in sorted(module.state_dict().items()):
    
        digest.update(name.encode("utf-8"))
        
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    
    return digest.hexdigest()


def freeze(module):
    """ Put `module` in evaluation mode and disable gradients of all its parameters. """
    module.eval()
    
    for parameter in module.parameters():
    
        parameter.requires_grad_(False)
    
    return module
