""" **differentiable_jpeg.py** implements differentiable approximations of JPEG compression.

Every approximation runs the JPEG pipeline 
    
    RGB -> YCbCr -> 8x8 block DCT -> quantization surrogate -> inverse DCT -> YCbCr -> RGB

and only differs in the surrogate that replaces the non-differentiable rounding of quantized
DCT coefficients:

- "mask" zeroes every coefficient outside a low-frequency region whose size grows with the quality factor.
- "soft" replaces rounding by the cubic pseudo-rounding q*(round(c/q) + (c/q - round(c/q))**3),
  with the standard quantization tables scaled by the quality factor.

Images are [B, 3, H, W] arrays in [0, 1]. Sizes which are not multiples of 8 are padded by
edge replication and cropped back afterwards.
"""
import raeg
import math
import torch


LUMINANCE_QUANTIZATION_TABLE = (
    (16, 11, 10, 16, 24, 40, 51, 61),
    (12, 12, 14, 19, 26, 58, 60, 55),
    (14, 13, 16, 24, 40, 57, 69, 56),
    (14, 17, 22, 29, 51, 87, 80, 62),
    (18, 22, 37, 56, 68, 109, 103, 77),
    (24, 35, 55, 64, 81, 104, 113, 92),
    (49, 64, 78, 87, 103, 121, 120, 101),
    (72, 92, 95, 98, 112, 100, 103, 99))

CHROMINANCE_QUANTIZATION_TABLE = (
    (17, 18, 24, 47, 99, 99, 99, 99),
    (18, 21, 26, 66, 99, 99, 99, 99),
    (24, 26, 56, 99, 99, 99, 99, 99),
    (47, 66, 99, 99, 99, 99, 99, 99),
    (99, 99, 99, 99, 99, 99, 99, 99),
    (99, 99, 99, 99, 99, 99, 99, 99),
    (99, 99, 99, 99, 99, 99, 99, 99),
    (99, 99, 99, 99, 99, 99, 99, 99))

_RGB_TO_YCBCR = (
    (0.299, 0.587, 0.114),
    (-0.168736, -0.331264, 0.5),
    (0.5, -0.418688, -0.081312))

MIN_QUALITY = 10

MAX_QUALITY = 100


def check_quality(quality):
    
    if not (MIN_QUALITY <= quality <= MAX_QUALITY):
    
        raise raeg.errors.ConfigError(
            "JPEG quality factor must lie in [" + str(MIN_QUALITY) + ", " + str(MAX_QUALITY) + "], got "
            + str(quality))


def rgb_to_ycbcr(x):
    """ Convert [B, 3, H, W] RGB in [0, 255] to YCbCr with chroma centred on 128. """
    matrix = torch.tensor(_RGB_TO_YCBCR, dtype = x.dtype, device = x.device)
    
    ycbcr = torch.einsum("ij,bjhw->bihw", matrix, x)
    
    offset = torch.tensor((0., 128., 128.), dtype = x.dtype, device = x.device).view(1, 3, 1, 1)
    
    return ycbcr + offset
    

def ycbcr_to_rgb(x):
    """ The exact inverse of `rgb_to_ycbcr`. """
    matrix = torch.linalg.inv(torch.tensor(_RGB_TO_YCBCR, dtype = torch.float64)).to(dtype = x.dtype, device = x.device)
    
    offset = torch.tensor((0., 128., 128.), dtype = x.dtype, device = x.device).view(1, 3, 1, 1)
    
    return torch.einsum("ij,bjhw->bihw", matrix, x - offset)


def dct_matrix(dtype = torch.float32, device = None):
    """ The orthonormal 8x8 DCT-II matrix D, such that coefficients are D X D^T. """
    n = torch.arange(8, dtype = torch.float64)
    
    k = n.view(8, 1)
    
    matrix = torch.cos((2.*n + 1.)*k*math.pi/16.)*math.sqrt(2./8.)
    
    matrix[0, :] = math.sqrt(1./8.)
    
    return matrix.to(dtype = dtype, device = device)


def to_blocks(x):
    """ Reshape [B, C, H, W] (H, W multiples of 8) into [B, C, H/8, W/8, 8, 8]. """
    B, C, H, W = x.shape
    
    return x.reshape(B, C, H//8, 8, W//8, 8).permute(0, 1, 2, 4, 3, 5)
    

def from_blocks(blocks):
    """ The inverse of `to_blocks`. """
    B, C, HB, WB, _, _ = blocks.shape
    
    return blocks.permute(0, 1, 2, 4, 3, 5).reshape(B, C, HB*8, WB*8)


def block_dct(x):
    
    D = dct_matrix(x.dtype, x.device)
    
    return D @ to_blocks(x) @ D.t()
    

def block_idct(coefficients):
    
    D = dct_matrix(coefficients.dtype, coefficients.device)
    
    return from_blocks(D.t() @ coefficients @ D)


def quality_to_scale(quality):
    """ The libjpeg scaling of the quantization tables, in percent. """
    check_quality(quality)
    
    if quality < 50:
    
        return 5000./quality
        
    return 200. - 2.*quality


def quantization_tables(quality, dtype = torch.float32, device = None):
    """ Return the [3, 8, 8] quantization steps for Y, Cb and Cr at `quality`. """
    scale = quality_to_scale(quality)
    
    tables = []
    
    for table in (LUMINANCE_QUANTIZATION_TABLE, CHROMINANCE_QUANTIZATION_TABLE, CHROMINANCE_QUANTIZATION_TABLE):
    
        t = torch.tensor(table, dtype = torch.float64)
        
        tables.append(torch.clamp(torch.floor((t*scale + 50.)/100.), 1., 255.))
        
    return torch.stack(tables).to(dtype = dtype, device = device)


def frequency_mask(quality, dtype = torch.float32, device = None):
    """ Return the [3, 8, 8] low-frequency masks used by the "mask" surrogate.
    
    A luminance coefficient (u, v) is kept if u + v < 1 + 14*quality/100,
    a chrominance coefficient if u + v < half of that. The DC coefficient is always kept.
    """
    check_quality(quality)
    
    index = torch.arange(8, dtype = torch.float64)
    
    frequency = index.view(8, 1) + index.view(1, 8)
    
    luminance_cutoff = 1. + 14.*quality/100.
    
    chrominance_cutoff = max(1., luminance_cutoff/2.)
    
    masks = (
        (frequency < luminance_cutoff),
        (frequency < chrominance_cutoff),
        (frequency < chrominance_cutoff))
        
    return torch.stack(masks).to(dtype = dtype, device = device)


def pseudo_round(x):
    """ round(x) + (x - round(x))**3, a rounding surrogate with nonzero gradient. """
    rounded = torch.round(x).detach()
    
    return rounded + (x - rounded)**3


def _pad_to_blocks(x):
    
    H, W = x.shape[-2:]
    
    pad_h = (-H) % 8
    
    pad_w = (-W) % 8
    
    if pad_h or pad_w:
    
        x = torch.nn.functional.pad(x, (0, pad_w, 0, pad_h), mode = "replicate")
    
    return x, H, W


def _jpeg_pipeline(x, surrogate):
    
    x, H, W = _pad_to_blocks(x)
    
    ycbcr = rgb_to_ycbcr(x*255.) - 128.
    
    coefficients = block_dct(ycbcr)
    
    coefficients = surrogate(coefficients)
    
    ycbcr = block_idct(coefficients) + 128.
    
    rgb = ycbcr_to_rgb(ycbcr)/255.
    
    return rgb[..., :H, :W].clamp(0., 1.)


def jpeg_mask(x, quality):
    """ JPEG approximation which discards high-frequency DCT coefficients.
    
    The quantization tables play no part here: the quality only moves the cutoff of `frequency_mask`,
    and the kept coefficients pass unchanged. The table scaling enters through `jpeg_soft`.
    """
    mask = frequency_mask(quality, x.dtype, x.device).view(1, 3, 1, 1, 8, 8)
    
    return _jpeg_pipeline(x, lambda c: c*mask)


def jpeg_soft(x, quality):
    """ JPEG approximation with cubic pseudo-rounding of quantized DCT coefficients. """
    q = quantization_tables(quality, x.dtype, x.device).view(1, 3, 1, 1, 8, 8)
    
    return _jpeg_pipeline(x, lambda c: q*pseudo_round(c/q))


def jpeg_hard(x, quality):
    """ The same pipeline with true rounding; not differentiable, used as a reference. """
    q = quantization_tables(quality, x.dtype, x.device).view(1, 3, 1, 1, 8, 8)
    
    return _jpeg_pipeline(x, lambda c: q*torch.round(c/q))


JPEG_METHODS = {
    "mask": jpeg_mask,
    "soft": jpeg_soft}
