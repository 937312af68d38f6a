""" **coupling.py** implements the double-side affine coupling (DSAC) block.

Given an input split into channel halves (x1, x2), the block computes
    
    y1 = x1*exp(s(theta1(x2))) + phi1(x2)
    y2 = x2*exp(s(theta2(y1))) + phi2(y1)

with the bounded scale function s(t) = clamp*tanh(t/clamp). The inverse is
    
    x2 = (y2 - phi2(y1))/exp(s(theta2(y1)))
    x1 = (y1 - phi1(x2))/exp(s(theta1(x2)))

The four subnets theta1, phi1, theta2, phi2 have independent parameters. 
They are small residual networks whose convolutions are spectrally normalized.
The last layer of every subnet is scaled by a learnable gain which is initialized to zero,
so that a freshly constructed block is exactly the identity map.
"""
import raeg
import contextlib
import torch


SPECTRAL_NORM_EPSILON = 1.e-12


def _normalize_or_keep(vector, previous, eps = SPECTRAL_NORM_EPSILON):
    """ Normalize `vector`, unless it vanishes, in which case `previous` is kept. """
    norm = torch.linalg.vector_norm(vector)
    
    if norm.item() <= eps:
    
        return previous
    
    return vector/norm


def spectral_normalize(weight, u, v, power_iterations = 1, eps = SPECTRAL_NORM_EPSILON):
    """ Divide `weight` by an estimate of its largest singular value.
    
    Convolution kernels are treated as matrices of shape [out_channels, in_channels*kh*kw].
    
    Parameters
    ----------
    weight : torch.Tensor
    
        Weight with at least one row and one column.
        
    u : torch.Tensor
    
        Left singular vector estimate, of length `weight.shape[0]`.
        
    v : torch.Tensor
    
        Right singular vector estimate, of length `weight[0].numel()`.
        
    power_iterations : int
    
        Number of power iteration steps used to refine `u` and `v` before estimating sigma. 
        Use one per training step, and zero during evaluation to reuse the stored estimate.
    
    eps : float
    
        Floor for the singular value estimate, which keeps a zero weight finite.
    
    Returns
    -------
    normalized_weight, u, v, sigma
    
        The singular vectors are detached; the gradient flows through sigma as in the usual formulation.
    """
    matrix = weight.reshape(weight.shape[0], -1)
    
    if (matrix.shape[0] < 1) or (matrix.shape[1] < 1):
    
        raise raeg.errors.ShapeError("Cannot normalize an empty weight of shape " + str(tuple(weight.shape)))
    
    with torch.no_grad():
    
        for iteration in range(power_iterations):
        
            v = _normalize_or_keep(torch.mv(matrix.t(), u), v, eps)
            
            u = _normalize_or_keep(torch.mv(matrix, v), u, eps)
        
    sigma = torch.dot(u, torch.mv(matrix, v)).clamp_min(eps)
    
    return weight/sigma, u, v, sigma


@contextlib.contextmanager
def fixed_spectral_estimates(module):
    """ Within this context no `SpectralNormConv2d` in `module` advances its power iteration. """
    layers = [m for m in module.modules() if isinstance(m, SpectralNormConv2d)]
    
    previous = [layer.update_estimate for layer in layers]
    
    for layer in layers:
    
        layer.update_estimate = False
        
    try:
    
        yield module
        
    finally:
    
        for layer, update in zip(layers, previous):
        
            layer.update_estimate = update


def clamp_log_scale(t, clamp):
    """ Smoothly bound `t` into (-clamp, clamp). """
    return clamp*torch.tanh(t/clamp)


class SpectralNormConv2d(torch.nn.Module):
    """ A 2D convolution whose kernel is divided by its estimated spectral norm.
    
    During training every call advances the power iteration by one step, unless
    `update_estimate` is False. In evaluation mode the stored singular vectors are used without update.
    """
    def __init__(self, in_channels, out_channels, kernel_size = 3, stride = 1, padding = 1, bias = True,
            initial_power_iterations = 20):
        
        super().__init__()
        
        self.stride = stride
        
        self.padding = padding
        
        self.weight = torch.nn.Parameter(torch.empty(out_channels, in_channels, kernel_size, kernel_size))
        
        torch.nn.init.kaiming_uniform_(self.weight, a = 0.2)
        
        if bias:
        
            self.bias = torch.nn.Parameter(torch.zeros(out_channels))
            
        else:
        
            self.register_parameter("bias", None)
        
        u = torch.nn.functional.normalize(torch.randn(out_channels), dim = 0)
        
        v = torch.nn.functional.normalize(torch.randn(in_channels*kernel_size*kernel_size), dim = 0)
        
        _, u, v, _ = spectral_normalize(self.weight.detach(), u, v, power_iterations = initial_power_iterations)
        
        self.register_buffer("u", u)
        
        self.register_buffer("v", v)
        
        self.update_estimate = True
        
    def normalized_weight(self):
    
        if self.training and self.update_estimate:
        
            weight, u, v, _ = spectral_normalize(
                self.weight, self.u.clone(), self.v.clone(), power_iterations = 1)
            
            with torch.no_grad():
            
                self.u.copy_(u)
                
                self.v.copy_(v)
                
        else:
        
            weight, _, _, _ = spectral_normalize(
                self.weight, self.u.clone(), self.v.clone(), power_iterations = 0)
        
        return weight
        
    def forward(self, x):
    
        return torch.nn.functional.conv2d(
            x, self.normalized_weight(), self.bias, stride = self.stride, padding = self.padding)


class ResidualBlock(torch.nn.Module):
    """ conv 3x3 -> LeakyReLU -> conv 3x3, plus the identity skip connection. """
    def __init__(self, width):
    
        super().__init__()
        
        self.conv1 = SpectralNormConv2d(width, width)
        
        self.conv2 = SpectralNormConv2d(width, width)
        
    def forward(self, x):
    
        return x + self.conv2(torch.nn.functional.leaky_relu(self.conv1(x), 0.2))


class ResidualSubnet(torch.nn.Module):
    """ The scale/shift network used for theta and phi. 
    
    Parameters
    ----------
    in_channels : int
    
    out_channels : int
    
    width : int
    
        Number of hidden channels.
        
    residual_blocks : int
    """
    def __init__(self, in_channels, out_channels, width = 32, residual_blocks = 2):
    
        super().__init__()
        
        self.conv_in = SpectralNormConv2d(in_channels, width)
        
        self.blocks = torch.nn.Sequential(*[ResidualBlock(width) for i in range(residual_blocks)])
        
        self.conv_out = SpectralNormConv2d(width, out_channels)
        
        self.gain = torch.nn.Parameter(torch.zeros(1))
        
    def forward(self, x):
    
        h = torch.nn.functional.leaky_relu(self.conv_in(x), 0.2)
        
        h = self.blocks(h)
        
        return self.gain*self.conv_out(h)


class DoubleSideAffineCoupling(torch.nn.Module):
    """ An exactly invertible coupling block with scale and shift on both channel halves.
    
    Parameters
    ----------
    channels : int
    
        Must be even; the first and last `channels//2` channels form the two halves.
        
    width : int
    
        Hidden width of the four subnets.
        
    clamp : float
    
        Bound of the log-scale, such that every scale factor lies in [exp(-clamp), exp(clamp)].
    """
    def __init__(self, channels, width = 32, clamp = 2., residual_blocks = 2):
    
        super().__init__()
        
        if channels % 2 != 0:
        
            raise raeg.errors.ShapeError("Coupling requires an even channel count, got " + str(channels))
            
        if not (clamp > 0.):
        
            raise raeg.errors.ConfigError("The coupling clamp must be positive, got " + str(clamp))
        
        self.channels = channels
        
        self.clamp = float(clamp)
        
        half = channels//2
        
        self.theta1 = ResidualSubnet(half, half, width, residual_blocks)
        
        self.phi1 = ResidualSubnet(half, half, width, residual_blocks)
        
        self.theta2 = ResidualSubnet(half, half, width, residual_blocks)
        
        self.phi2 = ResidualSubnet(half, half, width, residual_blocks)
        
    def _split(self, x):
    
        if (x.dim() != 4) or (x.shape[1] != self.channels):
        
            raise raeg.errors.ShapeError(
                "Coupling with " + str(self.channels) + " channels received shape " + str(tuple(x.shape)))
        
        return torch.chunk(x, 2, dim = 1)
        
    def _scale(self, t):
    
        return torch.exp(clamp_log_scale(t, self.clamp))
        
    def forward(self, x):
    
        x1, x2 = self._split(x)
        
        y1 = x1*self._scale(self.theta1(x2)) + self.phi1(x2)
        
        y2 = x2*self._scale(self.theta2(y1)) + self.phi2(y1)
        
        y = torch.cat((y1, y2), dim = 1)
        
        check_finite(y, "coupling forward")
        
        return y
        
    def inverse(self, y):
        """ Invert `forward` with the spectral estimates that `forward` last used, also in training mode. """
        y1, y2 = self._split(y)
        
        with fixed_spectral_estimates(self):
        
            x2 = (y2 - self.phi2(y1))/self._scale(self.theta2(y1))
            
            x1 = (y1 - self.phi1(x2))/self._scale(self.theta1(x2))
            
        x = torch.cat((x1, x2), dim = 1)
        
        check_finite(x, "coupling inverse")
        
        return x


def check_finite(x, where):
    """ Raise `raeg.errors.NumericError` if `x` holds NaN or infinite values. """
    if not bool(torch.isfinite(x).all()):
    
        raise raeg.errors.NumericError("Non-finite values in " + where)
