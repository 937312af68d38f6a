""" **test_coupling.py** tests **raeg/coupling.py**, the double-side affine coupling block and its subnets. """
import raeg
import pytest
import torch


class Zero(torch.nn.Module):
    
    def forward(self, x):
    
        return torch.zeros_like(x)
        

class Identity(torch.nn.Module):
    
    def forward(self, x):
    
        return x
        

def randomize_gains(module, value = 0.5):
    
    with torch.no_grad():
    
        for name, parameter in module.named_parameters():
        
            if name.endswith("gain"):
            
                parameter.fill_(value)
    
    return module


def test__coupling__identity_at_initialization__ci__():
    
    torch.manual_seed(0)
    
    block = raeg.coupling.DoubleSideAffineCoupling(12, width = 8, residual_blocks = 1)
    
    x = torch.randn(2, 12, 8, 8)
    
    assert(torch.equal(block(x), x))
    
    assert(torch.equal(block.inverse(x), x))
    
    
def test__coupling__additive_example__ci__():
    
    block = raeg.coupling.DoubleSideAffineCoupling(2, width = 4)
    
    block.theta1, block.phi1, block.theta2, block.phi2 = Zero(), Identity(), Zero(), Zero()
    
    x = torch.tensor([1.5, -0.25]).view(1, 2, 1, 1)
    
    y = block(x)
    
    assert(torch.equal(y.flatten(), torch.tensor([1.25, -0.25])))
    
    assert(torch.equal(block.inverse(y), x))


def test__coupling__roundtrip__ci__():
    
    torch.manual_seed(1)
    
    block = randomize_gains(raeg.coupling.DoubleSideAffineCoupling(12, width = 16)).eval()
    
    x = torch.randn(3, 12, 8, 8)
    
    y = block(x)
    
    assert(float((y - x).abs().max()) > 1.e-3)
    
    assert(float((block.inverse(y) - x).abs().max()) < 1.e-4)
    
    block = block.double()
    
    x = x.double()
    
    assert(float((block.inverse(block(x)) - x).abs().max()) < 1.e-9)


def test__clamp_log_scale__bounded__ci__():
    
    t = torch.tensor([-1.e6, -3., 0., 3., 1.e6])
    
    s = raeg.coupling.clamp_log_scale(t, 2.)
    
    assert(float(s.abs().max()) <= 2.)
    
    assert(s[2] == 0.)
    
    assert(torch.all(s[1:] >= s[:-1]))


def test__spectral_normalize__identity__ci__():
    
    u = torch.nn.functional.normalize(torch.tensor([1., 2., 3.]), dim = 0)
    
    v = torch.nn.functional.normalize(torch.tensor([3., 1., 1.]), dim = 0)
    
    weight, u, v, sigma = raeg.coupling.spectral_normalize(torch.eye(3), u, v, power_iterations = 1)
    
    assert(abs(float(sigma) - 1.) < 1.e-6)
    
    assert(torch.allclose(weight, torch.eye(3), atol = 1.e-6))
    
    weight, u, v, sigma = raeg.coupling.spectral_normalize(3.*torch.eye(3), u, v, power_iterations = 5)
    
    assert(abs(float(sigma) - 3.) < 1.e-5)
    
    assert(torch.allclose(weight, torch.eye(3), atol = 1.e-5))


def test__spectral_normalize__random_matrix__ci__():
    
    torch.manual_seed(2)
    
    matrix = torch.randn(4, 3, dtype = torch.float64)
    
    u = torch.nn.functional.normalize(torch.randn(4, dtype = torch.float64), dim = 0)
    
    v = torch.nn.functional.normalize(torch.randn(3, dtype = torch.float64), dim = 0)
    
    weight, _, _, _ = raeg.coupling.spectral_normalize(matrix, u, v, power_iterations = 50)
    
    assert(abs(float(torch.linalg.svdvals(weight)[0]) - 1.) < 0.01)


def test__spectral_normalize__zero_weight_stays_finite__ci__():
    
    u = torch.tensor([1., 0.])
    
    v = torch.tensor([0., 1.])
    
    weight, u, v, sigma = raeg.coupling.spectral_normalize(torch.zeros(2, 2), u, v, power_iterations = 3)
    
    assert(torch.isfinite(weight).all())
    
    assert(abs(float(sigma) - raeg.coupling.SPECTRAL_NORM_EPSILON) < 1.e-15)
    
    
def test__spectral_norm_conv__updates_only_in_training__ci__():
    
    torch.manual_seed(3)
    
    conv = raeg.coupling.SpectralNormConv2d(4, 4)
    
    x = torch.randn(1, 4, 6, 6)
    
    conv.eval()
    
    u = conv.u.clone()
    
    conv(x)
    
    assert(torch.equal(conv.u, u))
    
    conv.train()
    
    with torch.no_grad():
    
        conv.weight.mul_(torch.randn_like(conv.weight))
    
    conv(x)
    
    assert(not torch.equal(conv.u, u))
    
    
def test__residual_subnet__zero_output_at_initialization__ci__():
    
    subnet = raeg.coupling.ResidualSubnet(6, 6, width = 8)
    
    assert(torch.equal(subnet(torch.randn(2, 6, 4, 4)), torch.zeros(2, 6, 4, 4)))


def test__coupling__errors__ci__():
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.coupling.DoubleSideAffineCoupling(3)
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.coupling.DoubleSideAffineCoupling(4, clamp = 0.)
        
    block = raeg.coupling.DoubleSideAffineCoupling(4, width = 4)
    
    with pytest.raises(raeg.errors.ShapeError):
    
        block(torch.zeros(1, 6, 2, 2))


def test__coupling__gradcheck__ci__():
    
    torch.manual_seed(4)
    
    block = randomize_gains(raeg.coupling.DoubleSideAffineCoupling(4, width = 4, residual_blocks = 1)).double().eval()
    
    x = torch.randn(1, 4, 3, 3, dtype = torch.float64, requires_grad = True)
    
    assert(torch.autograd.gradcheck(block, (x,)))
    
    assert(torch.autograd.gradcheck(block.inverse, (x,)))


def test__coupling__inverse_reuses_forward_estimate_in_training__ci__():
    
    torch.manual_seed(4)
    
    block = randomize_gains(raeg.coupling.DoubleSideAffineCoupling(12, width = 8, residual_blocks = 1)).train()
    
    conv = block.theta1.conv_in
    
    x = torch.randn(2, 12, 8, 8)
    
    y = block(x)
    
    u = conv.u.clone()
    
    x_hat = block.inverse(y)
    
    assert(torch.equal(conv.u, u))
    
    assert(float((x_hat - x).abs().max()) < 1.e-4)
    
    assert(conv.update_estimate)


def test__fixed_spectral_estimates__ci__():
    
    torch.manual_seed(5)
    
    conv = raeg.coupling.SpectralNormConv2d(4, 4).train()
    
    with torch.no_grad():
    
        conv.weight.mul_(torch.randn_like(conv.weight))
    
    u = conv.u.clone()
    
    with raeg.coupling.fixed_spectral_estimates(conv):
    
        conv(torch.randn(1, 4, 6, 6))
    
    assert(torch.equal(conv.u, u))
    
    conv(torch.randn(1, 4, 6, 6))
    
    assert(not torch.equal(conv.u, u))
