""" **defense_simulation.py** implements the differentiable attack layer.

During training the protected image passes through one randomly sampled attack,
simulating what an adversary does to a distributed image before classifying it:
Gaussian noise, Gaussian blurring, rescaling, random cropping, or JPEG compression.
Every attack preserves the image shape and is differentiable with respect to the image.

Randomness is always drawn from an explicit `torch.Generator` owned by the caller.
"""
import raeg
import dataclasses
import math
import typing
import torch


ATTACK_KINDS = ("identity", "gaussian_noise", "gaussian_blur", "rescale", "random_crop", "jpeg_sim")


@dataclasses.dataclass
class InterpolationWeights:
    """ Convex weights of the JPEG approximation methods, e.g. {"mask": 0.3, "soft": 0.7}. """
    weights: typing.Dict[str, float]
    
    def __post_init__(self):
    
        self.weights = {str(method): float(weight) for method, weight in self.weights.items()}
        
        for method, weight in self.weights.items():
        
            if method not in raeg.differentiable_jpeg.JPEG_METHODS:
            
                raise raeg.errors.ConfigError("Unknown JPEG approximation method '" + method + "'")
                
            if not (weight >= 0.):
            
                raise raeg.errors.ConfigError("Interpolation weights must be nonnegative, got " + str(self.weights))
        
        if (len(self.weights) == 0) or (abs(sum(self.weights.values()) - 1.) > 1.e-6):
        
            raise raeg.errors.ConfigError("Interpolation weights must sum to 1, got " + str(self.weights))
    
    @classmethod
    def uniform(cls, methods):
    
        return cls({method: 1./len(methods) for method in methods})
        
    @classmethod
    def only(cls, method):
    
        return cls({method: 1.})


@dataclasses.dataclass
class AttackSpec:
    """ One concrete attack with its parameters. 
    
    Only the parameters of `kind` are meaningful:
    
    - gaussian_noise: `sigma`
    - gaussian_blur: `kernel` (odd, at least 3) and `sigma`
    - rescale: `factor` in (0, 1]
    - random_crop: `ratio` in (0, 1], the kept area fraction, and `offset`, 
      the relative position (top, left) of the crop window in [0, 1]^2
    - jpeg_sim: `quality` in [10, 100] and `weights`
    """
    kind: str = "identity"
    
    sigma: float = 0.
    
    kernel: int = 3
    
    factor: float = 1.
    
    ratio: float = 1.
    
    offset: typing.Tuple[float, float] = (0.5, 0.5)
    
    quality: int = 100
    
    weights: typing.Optional[InterpolationWeights] = None
    
    def __post_init__(self):
    
        self.validate()
        
    def validate(self):
        """ Raise `raeg.errors.ConfigError` if the parameters of `kind` are invalid. """
        def fail(message):
        
            raise raeg.errors.ConfigError("Invalid " + self.kind + " attack: " + message)
        
        if self.kind not in ATTACK_KINDS:
        
            raise raeg.errors.ConfigError("Unknown attack kind '" + str(self.kind) + "'")
        
        if self.kind in ("gaussian_noise", "gaussian_blur") and not (self.sigma >= 0.):
        
            fail("sigma must be nonnegative")
        
        if self.kind == "gaussian_blur" and ((self.kernel < 3) or (self.kernel % 2 == 0)):
        
            fail("kernel size must be odd and at least 3")
        
        if self.kind == "rescale" and not (0. < self.factor <= 1.):
        
            fail("factor must lie in (0, 1]")
        
        if self.kind == "random_crop":
        
            if not (0. < self.ratio <= 1.):
            
                fail("ratio must lie in (0, 1]")
                
            if not all(0. <= o <= 1. for o in self.offset):
            
                fail("offset must lie in [0, 1]^2")
        
        if self.kind == "jpeg_sim":
        
            qualities = self.quality if isinstance(self.quality, (tuple, list)) else (self.quality,)
            
            for quality in qualities:
        
                raeg.differentiable_jpeg.check_quality(quality)
            
            if self.weights is None:
            
                fail("interpolation weights are required")
    
    def describe(self):
        """ A short label, e.g. "jpeg_sim(quality=50)". """
        parameters = {
            "identity": (),
            "gaussian_noise": ("sigma",),
            "gaussian_blur": ("kernel", "sigma"),
            "rescale": ("factor",),
            "random_crop": ("ratio",),
            "jpeg_sim": ("quality",)}[self.kind]
        
        return self.kind + "(" + ", ".join(name + "=" + _format(getattr(self, name)) for name in parameters) + ")"


def _format(value):
    
    if isinstance(value, float):
    
        return "%.3g" % value
        
    return str(value)


@dataclasses.dataclass
class AttackStrengths:
    """ The enabled attack kinds and the ranges their parameters are drawn from. """
    kinds: typing.Sequence[str] = ATTACK_KINDS
    
    noise_sigma: typing.Tuple[float, float] = (0., 0.05)
    
    blur_kernel: typing.Tuple[int, int] = (3, 5)
    
    blur_sigma: typing.Tuple[float, float] = (0.5, 1.5)
    
    rescale_factor: typing.Tuple[float, float] = (0.5, 1.)
    
    crop_ratio: typing.Tuple[float, float] = (0.8, 1.)
    
    jpeg_quality: typing.Tuple[int, int] = (10, 100)
    
    jpeg_methods: typing.Sequence[str] = ("mask", "soft")
    
    jpeg_weights: typing.Optional[typing.Dict[str, float]] = None
    
    per_sample: bool = False
    
    def __post_init__(self):
    
        self.kinds = tuple(self.kinds)
        
        if len(self.kinds) == 0:
        
            raise raeg.errors.ConfigError("At least one attack kind must be enabled", keys = ("attacks.kinds",))
        
        for kind in self.kinds:
        
            if kind not in ATTACK_KINDS:
            
                raise raeg.errors.ConfigError("Unknown attack kind '" + str(kind) + "'", keys = ("attacks.kinds",))
        
        for name in ("noise_sigma", "blur_kernel", "blur_sigma", "rescale_factor", "crop_ratio", "jpeg_quality"):
        
            low, high = getattr(self, name)
            
            if low > high:
            
                raise raeg.errors.ConfigError(
                    "Range attacks." + name + " is empty: " + str((low, high)), keys = ("attacks." + name,))
        
        if self.jpeg_weights is not None:
        
            InterpolationWeights(self.jpeg_weights)
    
    @classmethod
    def from_config(cls, cfg):
    
        attacks = cfg["attacks"]
        
        return cls(
            kinds = tuple(attacks["kinds"]),
            noise_sigma = tuple(attacks["noise_sigma"]),
            blur_kernel = tuple(attacks["blur_kernel"]),
            blur_sigma = tuple(attacks["blur_sigma"]),
            rescale_factor = tuple(attacks["rescale_factor"]),
            crop_ratio = tuple(attacks["crop_ratio"]),
            jpeg_quality = tuple(attacks["jpeg_quality"]),
            jpeg_methods = tuple(attacks["jpeg_methods"]),
            jpeg_weights = attacks["jpeg_weights"],
            per_sample = bool(attacks["per_sample"]))


def _uniform(generator, low, high):
    
    return low + (high - low)*torch.rand((), generator = generator, dtype = torch.float64).item()


def _integer(generator, low, high):
    """ Uniform integer in [low, high]. """
    return int(torch.randint(int(low), int(high) + 1, (), generator = generator).item())


def sample_interpolation_weights(generator, strengths):
    """ Fixed weights if configured, otherwise a flat Dirichlet draw over the configured methods. """
    if strengths.jpeg_weights is not None:
    
        return InterpolationWeights(strengths.jpeg_weights)
    
    draws = -torch.log(torch.rand(len(strengths.jpeg_methods), generator = generator, dtype = torch.float64))
    
    draws = draws/draws.sum()
    
    weights = {method: float(w) for method, w in zip(strengths.jpeg_methods, draws)}
    
    weights[strengths.jpeg_methods[-1]] = 1. - sum(weights[m] for m in strengths.jpeg_methods[:-1])
    
    return InterpolationWeights(weights)


def sample_attack(generator, strengths):
    """ Draw a kind uniformly from `strengths.kinds`, then its parameters uniformly from their ranges. """
    kind = strengths.kinds[_integer(generator, 0, len(strengths.kinds) - 1)]
    
    if kind == "gaussian_noise":
    
        return AttackSpec(kind, sigma = _uniform(generator, *strengths.noise_sigma))
    
    if kind == "gaussian_blur":
    
        low, high = strengths.blur_kernel
        
        kernels = [k for k in range(max(3, low), high + 1) if k % 2 == 1]
        
        if not kernels:
        
            raise raeg.errors.ConfigError("No odd blur kernel size in " + str((low, high)), keys = ("attacks.blur_kernel",))
        
        return AttackSpec(
            kind,
            kernel = kernels[_integer(generator, 0, len(kernels) - 1)],
            sigma = _uniform(generator, *strengths.blur_sigma))
    
    if kind == "rescale":
    
        return AttackSpec(kind, factor = _uniform(generator, *strengths.rescale_factor))
    
    if kind == "random_crop":
    
        return AttackSpec(
            kind,
            ratio = _uniform(generator, *strengths.crop_ratio),
            offset = (_uniform(generator, 0., 1.), _uniform(generator, 0., 1.)))
    
    if kind == "jpeg_sim":
    
        return AttackSpec(
            kind,
            quality = _integer(generator, *strengths.jpeg_quality),
            weights = sample_interpolation_weights(generator, strengths))
    
    return AttackSpec("identity")


def gaussian_kernel(size, sigma, dtype = torch.float32, device = None):
    """ A normalized 1D Gaussian kernel; sigma = 0 gives the discrete delta. """
    position = torch.arange(size, dtype = torch.float64) - (size - 1)/2.
    
    if sigma <= 0.:
    
        kernel = (position == 0.).to(torch.float64)
        
    else:
    
        kernel = torch.exp(-position**2/(2.*sigma**2))
    
    return (kernel/kernel.sum()).to(dtype = dtype, device = device)


def gaussian_blur(x, kernel_size, sigma):
    """ Separable Gaussian blur with reflected borders, applied per channel. """
    C = x.shape[1]
    
    kernel = gaussian_kernel(kernel_size, sigma, x.dtype, x.device)
    
    pad = kernel_size//2
    
    mode = "reflect" if min(x.shape[-2:]) > pad else "replicate"
    
    x = torch.nn.functional.pad(x, (pad, pad, pad, pad), mode = mode)
    
    x = torch.nn.functional.conv2d(x, kernel.view(1, 1, 1, -1).repeat(C, 1, 1, 1), groups = C)
    
    return torch.nn.functional.conv2d(x, kernel.view(1, 1, -1, 1).repeat(C, 1, 1, 1), groups = C)


def resize(x, size):
    
    if tuple(x.shape[-2:]) == tuple(size):
    
        return x
    
    return torch.nn.functional.interpolate(x, size = size, mode = "bilinear", align_corners = False)


def rescale(x, factor):
    """ Bilinear downscaling by `factor`, then bilinear upscaling back to the original size. """
    H, W = x.shape[-2:]
    
    small = (max(1, int(round(H*factor))), max(1, int(round(W*factor))))
    
    return resize(resize(x, small), (H, W))


def random_crop(x, ratio, offset):
    """ Crop a window of area fraction `ratio` at relative position `offset`, and resize it back. """
    H, W = x.shape[-2:]
    
    side = math.sqrt(ratio)
    
    h = max(1, int(round(H*side)))
    
    w = max(1, int(round(W*side)))
    
    top = int(round(offset[0]*(H - h)))
    
    left = int(round(offset[1]*(W - w)))
    
    return resize(x[..., top:top + h, left:left + w], (H, W))


def gaussian_noise(x, sigma, generator = None):
    
    if sigma == 0.:
    
        return x
    
    device = generator.device if generator is not None else x.device
    
    noise = torch.randn(x.shape, generator = generator, dtype = x.dtype, device = device).to(x.device)
    
    return x + sigma*noise


def jpeg_sim(x, quality, weights):
    """ Convex combination of the JPEG approximation methods.
    
    Parameters
    ----------
    x : torch.Tensor
    
        [B, 3, H, W] images in [0, 1].
        
    quality : int or sequence of ints
    
        With a sequence, the approximations at every quality factor are averaged with equal weights.
        
    weights : InterpolationWeights
    """
    qualities = tuple(quality) if isinstance(quality, (tuple, list)) else (quality,)
    
    for q in qualities:
    
        raeg.differentiable_jpeg.check_quality(q)
    
    result = 0.
    
    for method, weight in weights.weights.items():
    
        if weight == 0.:
        
            continue
        
        approximation = raeg.differentiable_jpeg.JPEG_METHODS[method]
        
        for q in qualities:
        
            result = result + (weight/len(qualities))*approximation(x, q)
    
    return result


def apply_attack(spec, x, generator = None):
    """ Apply the attack described by `spec` to the image batch `x`, preserving its shape. """
    spec.validate()
    
    if spec.kind == "identity":
    
        return x
    
    if spec.kind == "gaussian_noise":
    
        return gaussian_noise(x, spec.sigma, generator)
    
    if spec.kind == "gaussian_blur":
    
        return gaussian_blur(x, spec.kernel, spec.sigma)
    
    if spec.kind == "rescale":
    
        return rescale(x, spec.factor)
    
    if spec.kind == "random_crop":
    
        return random_crop(x, spec.ratio, spec.offset)
    
    return jpeg_sim(x, spec.quality, spec.weights)


def sample_and_apply(x, generator, strengths):
    """ Attack `x` with one sampled spec, or one spec per image if `strengths.per_sample`. 
    
    Returns the attacked batch and the list of applied specs.
    """
    if not strengths.per_sample:
    
        spec = sample_attack(generator, strengths)
        
        return apply_attack(spec, x, generator), [spec]
    
    specs = [sample_attack(generator, strengths) for i in range(x.shape[0])]
    
    attacked = [apply_attack(spec, x[i:i + 1], generator) for i, spec in enumerate(specs)]
    
    return torch.cat(attacked, dim = 0), specs
