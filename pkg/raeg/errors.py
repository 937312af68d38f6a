""" **errors.py** defines the exceptions raised throughout RAEG.

Every exception derives from `RAEGError`, so that the command line interface can report
all expected failures uniformly, while also deriving from the closest builtin exception
so that callers who do not know about RAEG can still catch them.
"""


class RAEGError(Exception):
    """ Base class of all expected RAEG failures. """


class ShapeError(RAEGError, ValueError):
    """ An array does not have the shape an operation requires. """


class ConfigError(RAEGError, ValueError):
    """ A configuration, attack description or argument is invalid. 
    
    Parameters
    ----------
    message : string
    
    keys : list of strings, optional
    
        Dotted names of the offending configuration keys.
    """
    def __init__(self, message, keys = ()):
    
        self.keys = tuple(keys)
        
        super().__init__(message)


class NumericError(RAEGError, ArithmeticError):
    """ A network produced non-finite values. """


class NonFiniteLossError(NumericError):
    """ A loss term became non-finite during training.
    
    Parameters
    ----------
    term : string
    
        Name of the offending loss term, e.g. "cls".
        
    value : float
    """
    def __init__(self, term, value):
    
        self.term = term
        
        self.value = value
        
        super().__init__("Loss term '" + term + "' is not finite (value = " + str(value) + ")")


class CheckpointError(RAEGError, IOError):
    """ A checkpoint archive could not be written or read. """


class ConfigMismatchError(CheckpointError):
    """ A checkpoint was written with a different configuration than the one requested.
    
    Parameters
    ----------
    field : string
    
    expected
    
    found
    """
    def __init__(self, field, expected, found):
    
        self.field = field
        
        self.expected = expected
        
        self.found = found
        
        super().__init__(
            "Checkpoint configuration mismatch for field '" + field + "': expected "
            + repr(expected) + ", found " + repr(found))


class DatasetError(RAEGError, IOError):
    """ A dataset folder violates the expected layout.
    
    Parameters
    ----------
    message : string
    
    paths : list of strings, optional
    
        Paths of the offending files or directories.
    """
    def __init__(self, message, paths = ()):
    
        self.paths = tuple(str(path) for path in paths)
        
        if self.paths:
        
            message = message + ": " + ", ".join(self.paths)
        
        super().__init__(message)


class DefenseUnavailableError(RAEGError, RuntimeError):
    """ A real codec or an external defense command could not be run. """
