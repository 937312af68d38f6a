""" **haar.py** implements the orthonormal 2D Haar wavelet transform.

The generator uses single-level transforms as its invertible down/upsampling layers.

For each 2x2 block
    
    a b
    c d

of each channel, the four subbands are
    
    LL = (a + b + c + d)/2,  LH = (a + b - c - d)/2,
    HL = (a - b + c - d)/2,  HH = (a - b - c + d)/2.

The 4x4 matrix of this map is symmetric and orthogonal, hence it is its own inverse.
The output channels are grouped block-wise: all LL channels, then all LH, HL and HH.
"""
import raeg
import torch


def haar_forward(x):
    """ Decompose `x` of shape [B, C, H, W] into subbands of shape [B, 4C, H/2, W/2]. 
    
    Raises `raeg.errors.ShapeError` for odd spatial dimensions.
    """
    if x.dim() != 4:
    
        raise raeg.errors.ShapeError("Expected a 4D array, got shape " + str(tuple(x.shape)))
    
    B, C, H, W = x.shape
    
    if (H % 2 != 0) or (W % 2 != 0):
    
        raise raeg.errors.ShapeError(
            "Haar analysis requires even spatial dimensions, got " + str((H, W)))
    
    a = x[:, :, 0::2, 0::2]
    
    b = x[:, :, 0::2, 1::2]
    
    c = x[:, :, 1::2, 0::2]
    
    d = x[:, :, 1::2, 1::2]
    
    ll = (a + b + c + d)/2.
    
    lh = (a + b - c - d)/2.
    
    hl = (a - b + c - d)/2.
    
    hh = (a - b - c + d)/2.
    
    return torch.cat((ll, lh, hl, hh), dim = 1)
    

def haar_inverse(s):
    """ Synthesize [B, C, 2H, 2W] from subbands of shape [B, 4C, H, W]. 
    
    This is the exact inverse of `haar_forward`.
    Raises `raeg.errors.ShapeError` if the channel count is not divisible by four.
    """
    if s.dim() != 4:
    
        raise raeg.errors.ShapeError("Expected a 4D array, got shape " + str(tuple(s.shape)))
    
    B, C4, H, W = s.shape
    
    if C4 % 4 != 0:
    
        raise raeg.errors.ShapeError(
            "Haar synthesis requires a channel count divisible by 4, got " + str(C4))
    
    ll, lh, hl, hh = torch.chunk(s, 4, dim = 1)
    
    x = s.new_empty((B, C4//4, 2*H, 2*W))
    
    x[:, :, 0::2, 0::2] = (ll + lh + hl + hh)/2.
    
    x[:, :, 0::2, 1::2] = (ll + lh - hl - hh)/2.
    
    x[:, :, 1::2, 0::2] = (ll - lh + hl - hh)/2.
    
    x[:, :, 1::2, 1::2] = (ll - lh - hl + hh)/2.
    
    return x


class HaarDownsampling(torch.nn.Module):
    """ An invertible layer wrapping `haar_forward`, with `inverse` wrapping `haar_inverse`. """
    def forward(self, x):
    
        return haar_forward(x)
        
    def inverse(self, s):
    
        return haar_inverse(s)


class HaarUpsampling(torch.nn.Module):
    """ The mirror image of `HaarDownsampling`, used in the synthesis half of the generator. """
    def forward(self, s):
    
        return haar_inverse(s)
        
    def inverse(self, x):
    
        return haar_forward(x)
