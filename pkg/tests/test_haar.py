""" **test_haar.py** tests **raeg/haar.py**, the orthonormal Haar transform. """
import raeg
import pytest
import torch


def test__haar_forward__block_example__ci__():
    
    x = torch.tensor([[[[1., 2.], [3., 4.]]]])
    
    s = raeg.haar.haar_forward(x)
    
    assert(s.shape == (1, 4, 1, 1))
    
    assert(torch.equal(s.flatten(), torch.tensor([5., -2., -1., 0.])))
    
    
def test__haar_inverse__block_example__ci__():
    
    s = torch.tensor([5., -2., -1., 0.]).view(1, 4, 1, 1)
    
    assert(torch.equal(raeg.haar.haar_inverse(s), torch.tensor([[[[1., 2.], [3., 4.]]]])))


def test__haar_forward__constant_image__ci__():
    
    c = 0.3
    
    s = raeg.haar.haar_forward(torch.full((2, 3, 8, 8), c, dtype = torch.float64))
    
    assert(torch.allclose(s[:, :3], torch.full_like(s[:, :3], 2.*c)))
    
    assert(torch.equal(s[:, 3:], torch.zeros_like(s[:, 3:])))
    
    
def test__haar__channel_order_is_blockwise__ci__():
    
    x = torch.zeros(1, 2, 2, 2)
    
    x[0, 1] = 1.
    
    s = raeg.haar.haar_forward(x)
    
    """ The LL subband of the second channel is output channel 1, followed by the LH of both channels. """
    assert(s[0, 1, 0, 0] == 2.)
    
    assert(s[0, 0, 0, 0] == 0.)
    
    assert(torch.equal(s[0, 2:], torch.zeros(6, 1, 1)))


def test__haar__roundtrip__ci__():
    
    torch.manual_seed(0)
    
    x = torch.rand(4, 3, 16, 24)
    
    assert(float((raeg.haar.haar_inverse(raeg.haar.haar_forward(x)) - x).abs().max()) < 1.e-6)
    
    s = torch.randn(2, 12, 5, 7)
    
    assert(float((raeg.haar.haar_forward(raeg.haar.haar_inverse(s)) - s).abs().max()) < 1.e-6)
    
    
def test__haar_inverse__zero__ci__():
    
    assert(torch.equal(raeg.haar.haar_inverse(torch.zeros(1, 8, 3, 3)), torch.zeros(1, 2, 6, 6)))
    

def test__haar__preserves_energy__ci__():
    
    torch.manual_seed(1)
    
    x = torch.randn(2, 3, 32, 32, dtype = torch.float64)
    
    energy = float((x**2).sum())
    
    assert(abs(float((raeg.haar.haar_forward(x)**2).sum()) - energy)/energy < 1.e-5)


def test__haar__modules_are_mutual_inverses__ci__():
    
    x = torch.rand(1, 3, 4, 4)
    
    down = raeg.haar.HaarDownsampling()
    
    up = raeg.haar.HaarUpsampling()
    
    assert(torch.allclose(up(down(x)), x, atol = 1.e-6))
    
    assert(torch.allclose(down.inverse(up.inverse(x)), x, atol = 1.e-6))


def test__haar__shape_errors__ci__():
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.haar.haar_forward(torch.zeros(1, 3, 5, 4))
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.haar.haar_forward(torch.zeros(3, 4, 4))
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.haar.haar_inverse(torch.zeros(1, 6, 2, 2))


def test__haar__gradcheck__ci__():
    
    x = torch.randn(1, 2, 4, 4, dtype = torch.float64, requires_grad = True)
    
    assert(torch.autograd.gradcheck(raeg.haar.haar_forward, (x,)))
    
    s = torch.randn(1, 8, 2, 2, dtype = torch.float64, requires_grad = True)
    
    assert(torch.autograd.gradcheck(raeg.haar.haar_inverse, (s,)))


def test__haar__linear__ci__():
    
    torch.manual_seed(0)
    
    a = torch.randn(2, 3, 8, 8, dtype = torch.float64)
    
    b = torch.randn(2, 3, 8, 8, dtype = torch.float64)
    
    combined = raeg.haar.haar_forward(2.*a - 0.5*b)
    
    assert(torch.allclose(combined, 2.*raeg.haar.haar_forward(a) - 0.5*raeg.haar.haar_forward(b), atol = 1.e-12))
    
    s = raeg.haar.haar_forward(a)
    
    assert(torch.allclose(raeg.haar.haar_inverse(3.*s + s), 4.*a, atol = 1.e-12))
