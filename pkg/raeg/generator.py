""" **generator.py** implements the U-shaped invertible generator.

The analysis half applies, for each of `scales` levels, a Haar decomposition followed by
`blocks_per_scale` coupling blocks. The synthesis half mirrors it: coupling blocks followed by
a Haar synthesis. Both halves have their own parameters. The whole network is one invertible
chain without skip concatenations, so `recover(protect(I)) == I` up to floating point error.
"""
import raeg
import dataclasses
import torch


@dataclasses.dataclass
class GeneratorConfig:
    """ Architecture of the invertible generator. """
    scales: int = 3
    
    blocks_per_scale: int = 4
    
    subnet_width: int = 32
    
    clamp: float = 2.
    
    input_channels: int = 3
    
    residual_blocks: int = 2
    
    def __post_init__(self):
    
        if self.scales < 1:
        
            raise raeg.errors.ConfigError("scales must be at least 1", keys = ("model.scales",))
        
        if self.blocks_per_scale < 1:
        
            raise raeg.errors.ConfigError("blocks_per_scale must be at least 1", keys = ("model.blocks_per_scale",))
        
        if not (self.clamp > 0.):
        
            raise raeg.errors.ConfigError("clamp must be positive", keys = ("model.clamp",))
    
    @classmethod
    def from_config(cls, cfg):
    
        model = cfg["model"]
        
        return cls(
            scales = int(model["scales"]),
            blocks_per_scale = int(model["blocks_per_scale"]),
            subnet_width = int(model["subnet_width"]),
            clamp = float(model["clamp"]),
            residual_blocks = int(model["residual_blocks"]))
    
    def to_dict(self):
    
        return dataclasses.asdict(self)
    
    @property
    def size_multiple(self):
        """ Input heights and widths must be multiples of this. """
        return 2**self.scales


class InvertibleGenerator(torch.nn.Module):
    """ The generator G, with `protect` as its forward pass and `recover` as its inverse. 
    
    Parameters
    ----------
    config : GeneratorConfig
    """
    def __init__(self, config = None):
    
        super().__init__()
        
        self.config = config if config is not None else GeneratorConfig()
        
        self.metadata = {}
        
        self.analysis = torch.nn.ModuleList()
        
        self.synthesis = torch.nn.ModuleList()
        
        for scale in range(self.config.scales):
        
            self.analysis.append(self._blocks(self._channels(scale)))
        
        for scale in reversed(range(self.config.scales)):
        
            self.synthesis.append(self._blocks(self._channels(scale)))
    
    def _channels(self, scale):
        """ Channel count after the Haar decomposition at `scale` (counted from 0). """
        return self.config.input_channels*4**(scale + 1)
        
    def _blocks(self, channels):
    
        return torch.nn.ModuleList([
            raeg.coupling.DoubleSideAffineCoupling(
                channels = channels,
                width = self.config.subnet_width,
                clamp = self.config.clamp,
                residual_blocks = self.config.residual_blocks)
            for i in range(self.config.blocks_per_scale)])
    
    def check_input(self, x):
        """ Raise `raeg.errors.ShapeError` unless `x` is [B, C, H, W] with H, W divisible by 2**scales. """
        if (x.dim() != 4) or (x.shape[1] != self.config.input_channels):
        
            raise raeg.errors.ShapeError(
                "Expected an image batch [B, " + str(self.config.input_channels) + ", H, W], got "
                + str(tuple(x.shape)))
        
        m = self.config.size_multiple
        
        if (x.shape[2] % m != 0) or (x.shape[3] % m != 0):
        
            raise raeg.errors.ShapeError(
                "Image height and width must be divisible by " + str(m) + ", got " + str(tuple(x.shape[2:])))
    
    def protect(self, image):
        """ Run the forward pass, returning the raw (unclipped) protected image. """
        self.check_input(image)
        
        x = image
        
        for blocks in self.analysis:
        
            x = raeg.haar.haar_forward(x)
            
            for block in blocks:
            
                x = block(x)
        
        for blocks in self.synthesis:
        
            for block in blocks:
            
                x = block(x)
                
            x = raeg.haar.haar_inverse(x)
        
        return x
        
    def recover(self, protected, clip = True):
        """ Run the inverse pass, returning the recovered image clipped to [0, 1]. """
        self.check_input(protected)
        
        x = protected
        
        for blocks in reversed(self.synthesis):
        
            x = raeg.haar.haar_forward(x)
            
            for block in reversed(blocks):
            
                x = block.inverse(x)
        
        for blocks in reversed(self.analysis):
        
            for block in reversed(blocks):
            
                x = block.inverse(x)
                
            x = raeg.haar.haar_inverse(x)
        
        if clip:
        
            x = x.clamp(0., 1.)
        
        return x
        
    def forward(self, image):
    
        return self.protect(image)
        
    def write_checkpoint(self, filepath, metadata = None):
        """ Write all parameters and the architecture to a named-tensor archive. """
        print("Writing generator checkpoint to " + str(filepath))
        
        raeg.archive.write_archive(
            filepath,
            tensors = self.state_dict(),
            kind = "generator",
            config = self.config.to_dict(),
            metadata = metadata)
    
    @classmethod
    def read_checkpoint(cls, filepath, config = None):
        """ Construct a generator from a checkpoint.
        
        If `config` is given, every field must match the stored configuration,
        otherwise `raeg.errors.ConfigMismatchError` names the first differing field.
        """
        print("Reading generator checkpoint from " + str(filepath))
        
        manifest, tensors = raeg.archive.read_archive(filepath, kind = "generator")
        
        try:
        
            stored = GeneratorConfig(**manifest["config"])
            
        except TypeError as error:
        
            raise raeg.errors.CheckpointError("Corrupt generator config in " + str(filepath) + ": " + str(error))
        
        if config is not None:
        
            for field in dataclasses.fields(GeneratorConfig):
            
                expected = getattr(config, field.name)
                
                found = getattr(stored, field.name)
                
                if expected != found:
                
                    raise raeg.errors.ConfigMismatchError(field.name, expected, found)
        
        generator = cls(stored)
        
        raeg.archive.load_state_dict(generator, tensors, filepath)
        
        generator.metadata = manifest["metadata"]
        
        return generator


def save_checkpoint(generator, path, metadata = None):
    
    generator.write_checkpoint(path, metadata = metadata)


def load_checkpoint(path, config = None):
    
    return InvertibleGenerator.read_checkpoint(path, config = config)


def quantize(x):
    """ Clip to [0, 1] and round to the nearest multiple of 1/255. """
    return torch.round(x.clamp(0., 1.)*255.)/255.


def quantize_straight_through(x):
    """ `quantize` in the forward pass; the identity in the backward pass. """
    return x + (quantize(x) - x).detach()
