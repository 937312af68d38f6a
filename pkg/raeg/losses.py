""" **losses.py** implements the training objectives.

- `loss_prt`: L1 distance between the original and the protected image.
- `loss_rev`: L1 distance between the original and the recovered image, plus the
  alpha-weighted L1 distance of their perceptual features.
- `loss_cls`: cross entropy of the recovered image minus epsilon times the cross entropy of the
  attacked protected image, both averaged over the ensemble members.
- `loss_gan` and `loss_dis`: the non-saturating GAN objectives of the generator and the discriminator.

The generator minimizes total = prt + beta*rev + gamma*cls + delta*gan;
the discriminator minimizes `loss_dis` with its own optimizer.
"""
import raeg
import dataclasses
import math
import typing
import torch


LOGIT_BOUND = 30.


@dataclasses.dataclass
class LossWeights:
    
    alpha: float = 0.01
    
    beta: float = 1.
    
    gamma: float = 0.005
    
    delta: float = 0.01
    
    epsilon: float = 2.
    
    def __post_init__(self):
    
        for field in dataclasses.fields(self):
        
            value = float(getattr(self, field.name))
            
            if not math.isfinite(value):
            
                raise raeg.errors.ConfigError(
                    "Loss weight " + field.name + " must be finite, got " + str(value), keys = ("losses." + field.name,))
            
            setattr(self, field.name, value)
    
    @classmethod
    def from_config(cls, cfg):
    
        return cls(**{field.name: cfg["losses"][field.name] for field in dataclasses.fields(cls)})
        
    def to_dict(self):
    
        return dataclasses.asdict(self)


@dataclasses.dataclass
class LossReport:
    """ Values of every loss term of one training step.
    
    `per` is the unweighted perceptual feature distance which is part of `rev`.
    `total` is the generator objective; `dis` is optimized separately.
    `graph` holds the differentiable total and `attacks` the applied attack specs; 
    neither is part of the report's value.
    """
    prt: float = 0.
    
    rev: float = 0.
    
    per: float = 0.
    
    cls: float = 0.
    
    gan: float = 0.
    
    dis: float = 0.
    
    total: float = 0.
    
    grad_norms: typing.Dict[str, float] = dataclasses.field(default_factory = dict)
    
    graph: typing.Optional[torch.Tensor] = dataclasses.field(default = None, repr = False, compare = False)
    
    attacks: list = dataclasses.field(default_factory = list, repr = False, compare = False)
    
    TERMS = ("prt", "rev", "per", "cls", "gan", "dis", "total")
    
    def as_row(self):
        """ The scalar fields, followed by the gradient norms as "grad_<term>". """
        row = {term: getattr(self, term) for term in self.TERMS}
        
        for term, value in sorted(self.grad_norms.items()):
        
            row["grad_" + term] = value
        
        return row


def _check_shapes(a, b):
    
    if a.shape != b.shape:
    
        raise raeg.errors.ShapeError("Shape mismatch: " + str(tuple(a.shape)) + " vs " + str(tuple(b.shape)))


def loss_prt(image, protected):
    """ Mean absolute difference of the original and the protected image. """
    _check_shapes(image, protected)
    
    return (image - protected).abs().mean()


def perceptual_distance(extractor, image, recovered):
    """ Mean absolute difference of the perceptual features, i.e. normalized by H*W*C of the feature map. """
    _check_shapes(image, recovered)
    
    return (raeg.targets.perceptual_features(extractor, image) 
        - raeg.targets.perceptual_features(extractor, recovered)).abs().mean()


def loss_rev(image, recovered, extractor, alpha):
    """ alpha*perceptual_distance + mean absolute difference of the original and the recovered image. """
    _check_shapes(image, recovered)
    
    pixel = (image - recovered).abs().mean()
    
    if alpha == 0.:
    
        return pixel
    
    return alpha*perceptual_distance(extractor, image, recovered) + pixel


def mean_cross_entropy(logits, labels):
    """ Cross entropy averaged over the batch and then over the ensemble members. """
    return sum(torch.nn.functional.cross_entropy(member_logits, labels) for member_logits in logits)/len(logits)


def loss_cls(ensemble, recovered, adversarial, labels, epsilon):
    """ Encourage correct predictions on the recovered image and wrong ones on the adversarial image. """
    raeg.targets.check_labels(labels, ensemble.num_classes, recovered.shape[0])
    
    recovery_term = mean_cross_entropy(ensemble.ensemble_logits(recovered), labels)
    
    if epsilon == 0.:
    
        return recovery_term
    
    return recovery_term - epsilon*mean_cross_entropy(ensemble.ensemble_logits(adversarial), labels)


def _bounded(logits):
    
    return logits.clamp(-LOGIT_BOUND, LOGIT_BOUND)


def loss_gan(discriminator, protected):
    """ -E[log sigmoid(D(I_prt))]. """
    return torch.nn.functional.softplus(-_bounded(discriminator(protected))).mean()


def loss_dis(discriminator, image, protected):
    """ -E[log sigmoid(D(I))] - E[log(1 - sigmoid(D(I_prt)))]. """
    real = torch.nn.functional.softplus(-_bounded(discriminator(image))).mean()
    
    fake = torch.nn.functional.softplus(_bounded(discriminator(protected))).mean()
    
    return real + fake


def _value(x):
    
    return float(x.detach()) if torch.is_tensor(x) else float(x)


def loss_total(components, weights):
    """ Combine the loss terms into a `LossReport`.
    
    Parameters
    ----------
    components : dict
    
        Maps "prt", "rev", "cls", "gan" and optionally "per", "dis" to scalar tensors or floats.
        
    weights : LossWeights
    
    Raises `raeg.errors.NonFiniteLossError` naming the first non-finite term.
    """
    for term in LossReport.TERMS:
    
        if (term in components) and not math.isfinite(_value(components[term])):
        
            raise raeg.errors.NonFiniteLossError(term, _value(components[term]))
    
    total = components["prt"] \
        + weights.beta*components["rev"] \
        + weights.gamma*components["cls"] \
        + weights.delta*components["gan"]
    
    if not math.isfinite(_value(total)):
    
        raise raeg.errors.NonFiniteLossError("total", _value(total))
    
    return LossReport(
        prt = _value(components["prt"]),
        rev = _value(components["rev"]),
        per = _value(components.get("per", 0.)),
        cls = _value(components["cls"]),
        gan = _value(components["gan"]),
        dis = _value(components.get("dis", 0.)),
        total = _value(total),
        graph = total if torch.is_tensor(total) else None)
