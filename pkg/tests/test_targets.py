""" **test_targets.py** tests **raeg/targets.py**, the target classifiers, discriminator and feature extractor. """
import raeg
import pathlib
import tempfile
import pytest
import torch


class FlattenLogits(torch.nn.Module):
    """ Interprets a [B, K, 1, 1] batch as logits. """
    def __init__(self, num_classes):
    
        super().__init__()
        
        self.num_classes = num_classes
        
    def forward(self, x):
    
        return x.flatten(1)


def small_ensemble(held_out = False):
    
    torch.manual_seed(0)
    
    members = {name: raeg.targets.build_classifier(name, 4, width = 8) for name in ("plain", "residual")}
    
    extra = {"held_out_dense": raeg.targets.build_classifier("dense", 4, width = 8)} if held_out else None
    
    return raeg.targets.ClassifierEnsemble(members, 4, held_out = extra)
    

def test__classifiers__output_shapes__ci__():
    
    for architecture in raeg.targets.ARCHITECTURES:
    
        classifier = raeg.targets.build_classifier(architecture, 5, width = 8).eval()
        
        for size in (16, 32):
        
            assert(classifier(torch.rand(2, 3, size, size)).shape == (2, 5))
        
        assert(classifier.architecture == architecture)
        
        assert(len(classifier.stages) == 3)


def test__build_classifier__errors__ci__():
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.targets.build_classifier("vgg", 10)
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.targets.build_classifier("plain", 1)


def test__trunk__stops_after_second_pooling__ci__():
    
    for architecture in raeg.targets.ARCHITECTURES:
    
        classifier = raeg.targets.build_classifier(architecture, 3, width = 8).eval()
        
        assert(raeg.targets.trunk(classifier, torch.rand(1, 3, 32, 32)).shape[-2:] == (8, 8))


def test__ensemble__frozen__ci__():
    
    ensemble = small_ensemble().freeze()
    
    digest = raeg.helpers.parameters_digest(ensemble)
    
    ensemble.train()
    
    assert(not ensemble.training)
    
    assert(all(not p.requires_grad for p in ensemble.parameters()))
    
    ensemble.ensemble_logits(torch.rand(4, 3, 16, 16))
    
    assert(raeg.helpers.parameters_digest(ensemble) == digest)


def test__ensemble_logits__members_and_held_out__ci__():
    
    ensemble = small_ensemble(held_out = True).freeze()
    
    x = torch.rand(2, 3, 16, 16)
    
    assert(len(ensemble.ensemble_logits(x)) == 2)
    
    assert(len(ensemble.ensemble_logits(x, include_held_out = True)) == 3)
    
    assert(len(raeg.targets.ensemble_logits(ensemble, x)) == 2)
    
    single = raeg.targets.ClassifierEnsemble({"plain": ensemble.members["plain"]}, 4).freeze()
    
    assert(len(single.ensemble_logits(x)) == 1)


def test__ensemble_logits__duplicated_member__ci__():
    
    member = raeg.targets.build_classifier("plain", 4, width = 8)
    
    ensemble = raeg.targets.ClassifierEnsemble({"a": member, "b": member}, 4).freeze()
    
    a, b = ensemble.ensemble_logits(torch.rand(3, 3, 16, 16))
    
    assert(torch.equal(a, b))


def test__ensemble_accuracy__ci__():
    
    labels = torch.tensor([0, 3, 1, 2])
    
    x = torch.nn.functional.one_hot(labels, 4).float().view(4, 4, 1, 1)
    
    ensemble = raeg.targets.ClassifierEnsemble({"flat": FlattenLogits(4)}, 4)
    
    report = raeg.targets.ensemble_accuracy(ensemble, x, labels)
    
    assert(report["members"] == {"flat": 1.})
    
    assert(report["mean"] == 1.)
    
    torch.manual_seed(1)
    
    ensemble = raeg.targets.ClassifierEnsemble({"flat": FlattenLogits(10)}, 10)
    
    accuracy = raeg.targets.ensemble_accuracy(ensemble, torch.randn(2000, 10, 1, 1), torch.randint(0, 10, (2000,)))["mean"]
    
    assert(abs(accuracy - 0.1) < 0.03)
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.targets.ensemble_accuracy(ensemble, torch.randn(2, 10, 1, 1), torch.tensor([0, 10]))


def test__ensemble__checkpoint_roundtrip__ci__():
    
    ensemble = small_ensemble(held_out = True).freeze()
    
    ensemble.clean_accuracies = {"plain": 0.9, "residual": 0.95, "held_out_dense": 0.8}
    
    path = pathlib.Path(tempfile.mkdtemp())/"ensemble.raeg"
    
    ensemble.write_checkpoint(path)
    
    loaded = raeg.targets.ClassifierEnsemble.read_checkpoint(path)
    
    assert(loaded.frozen)
    
    assert(loaded.names == ensemble.names)
    
    assert(list(loaded.held_out.keys()) == ["held_out_dense"])
    
    assert(loaded.clean_accuracies == ensemble.clean_accuracies)
    
    assert(raeg.helpers.parameters_digest(loaded) == raeg.helpers.parameters_digest(ensemble))


def test__discriminator__one_logit_per_image__ci__():
    
    discriminator = raeg.targets.Discriminator(width = 4)
    
    assert(discriminator(torch.rand(3, 3, 16, 16)).shape == (3,))
    
    assert(discriminator(torch.rand(2, 3, 32, 32)).shape == (2,))


def test__discriminator__small_images__ci__():
    
    assert(raeg.targets.discriminator_downsamplings(8) == 3)
    
    assert(raeg.targets.discriminator_downsamplings(64) == 4)
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.targets.Discriminator(width = 4)(torch.rand(2, 3, 8, 8))
    
    discriminator = raeg.targets.Discriminator(width = 4, downsamplings = raeg.targets.discriminator_downsamplings(8))
    
    assert(len(discriminator.layers) == 3)
    
    assert(discriminator(torch.rand(2, 3, 8, 8)).shape == (2,))
    
    with pytest.raises(raeg.errors.ShapeError):
    
        discriminator(torch.rand(2, 3, 4, 8))


def test__discriminator__layers_are_spectrally_normalized__ci__():
    
    torch.manual_seed(2)
    
    discriminator = raeg.targets.Discriminator(width = 4)
    
    x = torch.rand(2, 3, 16, 16)
    
    with torch.no_grad():
    
        for step in range(100):
        
            discriminator(x)
    
    discriminator.eval()
    
    u = [layer.weight_u.clone() for layer in list(discriminator.layers) + [discriminator.head]]
    
    with torch.no_grad():
    
        discriminator(x)
    
    for layer, previous in zip(list(discriminator.layers) + [discriminator.head], u):
    
        assert(torch.equal(layer.weight_u, previous))
        
        weight = layer.weight.detach()
        
        sigma = float(torch.linalg.svdvals(weight.reshape(weight.shape[0], -1))[0])
        
        assert(0.999 < sigma < 1.1)


def test__ensemble_logits__gradient_reaches_input__ci__():
    
    ensemble = small_ensemble().freeze()
    
    x = torch.rand(2, 3, 16, 16, requires_grad = True)
    
    sum(logits.sum() for logits in ensemble.ensemble_logits(x)).backward()
    
    assert(x.grad is not None)
    
    assert(float(x.grad.abs().sum()) > 0.)
    
    assert(all(p.grad is None for p in ensemble.parameters()))


def test__feature_extractor__ci__():
    
    ensemble = small_ensemble().freeze()
    
    ensemble.clean_accuracies = {"plain": 0.5, "residual": 0.9}
    
    extractor = raeg.targets.FeatureExtractor.from_ensemble(ensemble)
    
    assert(extractor.classifier is ensemble.members["residual"])
    
    extractor.train()
    
    assert(not extractor.training)
    
    x = torch.rand(2, 3, 16, 16)
    
    a = raeg.targets.perceptual_features(extractor, x)
    
    assert(torch.equal(a, raeg.targets.perceptual_features(extractor, x)))
    
    assert(a.shape[-2:] == (4, 4))
    
    assert(float(raeg.losses.perceptual_distance(extractor, x, x)) == 0.)
    
    assert(float(raeg.losses.perceptual_distance(extractor, x, (x + 0.2).clamp(0., 1.))) > 0.)
