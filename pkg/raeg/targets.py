""" **targets.py** defines the networks that the generator is trained against.

- Small heterogeneous CNN classifiers (a plain, a residual and a densely connected one),
  which are pre-trained on clean images and then frozen as the ensemble of target networks.
- The discriminator, a stack of strided spectrally normalized convolutions with averaged patch logits,
  as deep as the image size allows.
- The perceptual feature extractor, the frozen trunk of a classifier up to its second pooling stage.

Every classifier is organized as a sequence of `stages`, each ending with a 2x downsampling,
followed by a global average pooling head.
"""
import raeg
import math
import torch


class PlainConvNet(torch.nn.Module):
    """ conv-BN-ReLU stages with max pooling. """
    def __init__(self, num_classes, width = 32, in_channels = 3):
    
        super().__init__()
        
        def stage(c_in, c_out):
        
            return torch.nn.Sequential(
                torch.nn.Conv2d(c_in, c_out, 3, padding = 1),
                torch.nn.BatchNorm2d(c_out),
                torch.nn.ReLU(inplace = True),
                torch.nn.Conv2d(c_out, c_out, 3, padding = 1),
                torch.nn.BatchNorm2d(c_out),
                torch.nn.ReLU(inplace = True),
                torch.nn.MaxPool2d(2))
        
        self.stages = torch.nn.ModuleList([
            stage(in_channels, width),
            stage(width, 2*width),
            stage(2*width, 4*width)])
            
        self.head = torch.nn.Linear(4*width, num_classes)
        
    def forward(self, x):
    
        for stage in self.stages:
        
            x = stage(x)
        
        return self.head(x.mean(dim = (2, 3)))


class _BasicResidualBlock(torch.nn.Module):
    
    def __init__(self, c_in, c_out):
    
        super().__init__()
        
        self.conv1 = torch.nn.Conv2d(c_in, c_out, 3, padding = 1, bias = False)
        
        self.bn1 = torch.nn.BatchNorm2d(c_out)
        
        self.conv2 = torch.nn.Conv2d(c_out, c_out, 3, padding = 1, bias = False)
        
        self.bn2 = torch.nn.BatchNorm2d(c_out)
        
        self.shortcut = torch.nn.Identity() if c_in == c_out else torch.nn.Sequential(
            torch.nn.Conv2d(c_in, c_out, 1, bias = False),
            torch.nn.BatchNorm2d(c_out))
    
    def forward(self, x):
    
        h = torch.relu(self.bn1(self.conv1(x)))
        
        return torch.relu(self.bn2(self.conv2(h)) + self.shortcut(x))


class ResidualConvNet(torch.nn.Module):
    """ A small ResNet: one residual block per stage, max pooling between stages. """
    def __init__(self, num_classes, width = 32, in_channels = 3):
    
        super().__init__()
        
        self.stem = torch.nn.Sequential(
            torch.nn.Conv2d(in_channels, width, 3, padding = 1, bias = False),
            torch.nn.BatchNorm2d(width),
            torch.nn.ReLU(inplace = True))
        
        self.stages = torch.nn.ModuleList([
            torch.nn.Sequential(_BasicResidualBlock(width, width), torch.nn.MaxPool2d(2)),
            torch.nn.Sequential(_BasicResidualBlock(width, 2*width), torch.nn.MaxPool2d(2)),
            torch.nn.Sequential(_BasicResidualBlock(2*width, 4*width), torch.nn.MaxPool2d(2))])
        
        self.head = torch.nn.Linear(4*width, num_classes)
        
    def forward(self, x):
    
        x = self.stem(x)
        
        for stage in self.stages:
        
            x = stage(x)
        
        return self.head(x.mean(dim = (2, 3)))


class _DenseLayer(torch.nn.Module):
    
    def __init__(self, c_in, growth):
    
        super().__init__()
        
        self.bn = torch.nn.BatchNorm2d(c_in)
        
        self.conv = torch.nn.Conv2d(c_in, growth, 3, padding = 1, bias = False)
        
    def forward(self, x):
    
        return torch.cat((x, self.conv(torch.relu(self.bn(x)))), dim = 1)


class DenseConvNet(torch.nn.Module):
    """ A small DenseNet: dense blocks of three layers, each followed by a 1x1 transition and pooling. """
    def __init__(self, num_classes, width = 32, in_channels = 3, layers_per_block = 3):
    
        super().__init__()
        
        growth = width//2
        
        self.stem = torch.nn.Conv2d(in_channels, width, 3, padding = 1, bias = False)
        
        stages = []
        
        channels = width
        
        for i in range(3):
        
            layers = []
            
            for j in range(layers_per_block):
            
                layers.append(_DenseLayer(channels, growth))
                
                channels += growth
            
            out_channels = width*2**i
            
            layers += [
                torch.nn.BatchNorm2d(channels),
                torch.nn.ReLU(inplace = True),
                torch.nn.Conv2d(channels, out_channels, 1, bias = False),
                torch.nn.AvgPool2d(2)]
                
            stages.append(torch.nn.Sequential(*layers))
            
            channels = out_channels
        
        self.stages = torch.nn.ModuleList(stages)
        
        self.head = torch.nn.Linear(channels, num_classes)
        
    def forward(self, x):
    
        x = self.stem(x)
        
        for stage in self.stages:
        
            x = stage(x)
        
        return self.head(x.mean(dim = (2, 3)))


ARCHITECTURES = {
    "plain": PlainConvNet,
    "residual": ResidualConvNet,
    "dense": DenseConvNet}


def build_classifier(architecture, num_classes, width = 32):
    
    if architecture not in ARCHITECTURES:
    
        raise raeg.errors.ConfigError(
            "Unknown classifier architecture '" + str(architecture) + "', choose from " + str(sorted(ARCHITECTURES)))
    
    if num_classes < 2:
    
        raise raeg.errors.ConfigError("A classifier needs at least 2 classes, got " + str(num_classes))
    
    model = ARCHITECTURES[architecture](num_classes = num_classes, width = width)
    
    model.architecture = architecture
    
    model.width = width
    
    model.num_classes = num_classes
    
    return model


def trunk(classifier, x, stages = 2):
    """ Run `classifier` up to and including its `stages`-th pooling stage. """
    if hasattr(classifier, "stem"):
    
        x = classifier.stem(x)
    
    for stage in classifier.stages[:stages]:
    
        x = stage(x)
    
    return x


def check_labels(labels, num_classes, batch_size = None):
    
    if (batch_size is not None) and (labels.shape[0] != batch_size):
    
        raise raeg.errors.ShapeError(
            "Got " + str(labels.shape[0]) + " labels for a batch of " + str(batch_size))
    
    if labels.numel() and ((int(labels.min()) < 0) or (int(labels.max()) >= num_classes)):
    
        raise raeg.errors.ConfigError("Labels must lie in [0, " + str(num_classes) + ")")


def accuracy_from_logits(logits, labels):
    """ Fraction of rows whose argmax equals the label. """
    if logits.shape[0] != labels.shape[0]:
    
        raise raeg.errors.ShapeError(
            "Got " + str(labels.shape[0]) + " labels for " + str(logits.shape[0]) + " logit rows")
    
    if labels.numel() == 0:
    
        return float("nan")
    
    return (logits.argmax(dim = 1) == labels).double().mean().item()


class ClassifierEnsemble(torch.nn.Module):
    """ The ensemble of target classifiers.
    
    Parameters
    ----------
    members : dict
    
        Maps member names to classifiers built with `build_classifier`.
        
    num_classes : int
    
    held_out : dict, optional
    
        Classifiers which are never used for training the generator,
        only for measuring transfer during evaluation.
    """
    def __init__(self, members, num_classes, held_out = None):
    
        super().__init__()
        
        if len(members) < 1:
        
            raise raeg.errors.ConfigError("The ensemble needs at least one member")
        
        for name, member in list(members.items()) + list((held_out or {}).items()):
        
            if getattr(member, "num_classes", num_classes) != num_classes:
            
                raise raeg.errors.ConfigError(
                    "Member '" + name + "' has " + str(member.num_classes) + " classes, expected " + str(num_classes))
        
        self.members = torch.nn.ModuleDict(members)
        
        self.held_out = torch.nn.ModuleDict(held_out or {})
        
        self.num_classes = num_classes
        
        self.frozen = False
        
        self.clean_accuracies = {}
    
    @property
    def names(self):
    
        return list(self.members.keys())
        
    def freeze(self):
    
        raeg.helpers.freeze(self)
        
        self.frozen = True
        
        return self
        
    def train(self, mode = True):
        """ Frozen ensembles stay in evaluation mode. """
        return super().train(mode and not getattr(self, "frozen", False))
    
    def ensemble_logits(self, x, include_held_out = False):
        """ Return the list of [B, num_classes] logits, one per member. """
        if x.dim() != 4:
        
            raise raeg.errors.ShapeError("Expected an image batch [B, C, H, W], got " + str(tuple(x.shape)))
        
        logits = [member(x) for member in self.members.values()]
        
        if include_held_out:
        
            logits += [member(x) for member in self.held_out.values()]
        
        return logits
    
    def member_logits(self, x):
        """ Return a dict from every member name, including held-out ones, to its logits. """
        named = list(self.members.items()) + list(self.held_out.items())
        
        return {name: member(x) for name, member in named}
    
    def forward(self, x):
    
        return self.ensemble_logits(x)
    
    def architecture_config(self):
    
        def describe(group):
        
            return [{"name": name, "architecture": m.architecture, "width": m.width} for name, m in group.items()]
        
        return {
            "num_classes": self.num_classes,
            "members": describe(self.members),
            "held_out": describe(self.held_out)}
    
    def write_checkpoint(self, filepath, metadata = None):
    
        print("Writing target ensemble checkpoint to " + str(filepath))
        
        metadata = dict(metadata or {})
        
        metadata["clean_accuracies"] = self.clean_accuracies
        
        raeg.archive.write_archive(
            filepath, 
            tensors = self.state_dict(), 
            kind = "ensemble", 
            config = self.architecture_config(),
            metadata = metadata)
    
    @classmethod
    def read_checkpoint(cls, filepath, freeze = True):
    
        print("Reading target ensemble checkpoint from " + str(filepath))
        
        manifest, tensors = raeg.archive.read_archive(filepath, kind = "ensemble")
        
        config = manifest["config"]
        
        def build(group):
        
            return {
                entry["name"]: build_classifier(entry["architecture"], config["num_classes"], entry["width"])
                for entry in group}
        
        ensemble = cls(build(config["members"]), config["num_classes"], held_out = build(config["held_out"]))
        
        raeg.archive.load_state_dict(ensemble, tensors, filepath)
        
        ensemble.clean_accuracies = manifest["metadata"].get("clean_accuracies", {})
        
        if freeze:
        
            ensemble.freeze()
        
        return ensemble


def ensemble_logits(ensemble, x):
    
    return ensemble.ensemble_logits(x)


def ensemble_accuracy(ensemble, x, labels, include_held_out = False):
    """ Top-1 accuracy of every member and their mean.
    
    Returns
    -------
    dict
    
        {"members": {name: accuracy}, "mean": float}; 
        held-out members are reported under "held_out" and excluded from the mean.
    """
    raeg.targets.check_labels(labels, ensemble.num_classes, x.shape[0])
    
    with torch.no_grad():
    
        logits = ensemble.member_logits(x)
    
    members = {name: accuracy_from_logits(logits[name], labels) for name in ensemble.members}
    
    report = {"members": members, "mean": sum(members.values())/len(members)}
    
    if include_held_out:
    
        report["held_out"] = {name: accuracy_from_logits(logits[name], labels) for name in ensemble.held_out}
    
    return report


def discriminator_downsamplings(image_size, maximum = 4):
    """ The number of stride-2 layers a discriminator can apply to `image_size` inputs. """
    if image_size < 2:
    
        raise raeg.errors.ShapeError("The discriminator needs images of at least 2x2 pixels, got " + str(image_size))
    
    return min(maximum, int(math.log2(image_size)))


class Discriminator(torch.nn.Module):
    """ Strided spectrally normalized convolutions and a 1-channel patch head; 
    the patch logits are averaged into one logit per image. 
    
    Parameters
    ----------
    width : int
    
        Channels of the first layer, doubled by each further downsampling.
    
    in_channels : int
    
    downsamplings : int
    
        Number of stride-2 layers; inputs must be at least 2**downsamplings pixels high and wide.
    """
    def __init__(self, width = 32, in_channels = 3, downsamplings = 4):
    
        super().__init__()
        
        if downsamplings < 1:
        
            raise raeg.errors.ConfigError("The discriminator needs at least one downsampling, got " + str(downsamplings))
        
        def sn_conv(c_in, c_out, kernel_size, stride, padding):
        
            return torch.nn.utils.spectral_norm(
                torch.nn.Conv2d(c_in, c_out, kernel_size = kernel_size, stride = stride, padding = padding))
        
        channels = [in_channels] + [width*2**i for i in range(downsamplings)]
        
        self.layers = torch.nn.ModuleList([
            sn_conv(c_in, c_out, 4, 2, 1) for c_in, c_out in zip(channels[:-1], channels[1:])])
        
        self.head = sn_conv(channels[-1], 1, 3, 1, 1)
        
        self.width = width
        
        self.downsamplings = downsamplings
    
    @property
    def min_size(self):
    
        return 2**self.downsamplings
    
    def forward(self, x):
    
        if (x.dim() != 4) or (min(x.shape[-2:]) < self.min_size):
        
            raise raeg.errors.ShapeError(
                "The discriminator with " + str(self.downsamplings) + " downsamplings needs images of at least "
                + str(self.min_size) + "x" + str(self.min_size) + " pixels, got shape " + str(tuple(x.shape)))
        
        for layer in self.layers:
        
            x = torch.nn.functional.leaky_relu(layer(x), 0.2)
        
        return self.head(x).mean(dim = (1, 2, 3))
    
    def write_checkpoint(self, filepath):
    
        raeg.archive.write_archive(filepath, self.state_dict(), kind = "discriminator",
            config = {"width": self.width, "downsamplings": self.downsamplings})


class FeatureExtractor(torch.nn.Module):
    """ The frozen trunk of a classifier, truncated after its second pooling stage. """
    def __init__(self, classifier, stages = 2):
    
        super().__init__()
        
        self.classifier = classifier
        
        self.stages = stages
        
        raeg.helpers.freeze(self)
        
    def train(self, mode = True):
    
        return super().train(False)
        
    def forward(self, x):
    
        return trunk(self.classifier, x, self.stages)
        
    @classmethod
    def from_ensemble(cls, ensemble):
        """ Use the member with the highest recorded clean accuracy, or the first member. """
        accuracies = ensemble.clean_accuracies
        
        if accuracies:
        
            name = max(ensemble.names, key = lambda n: accuracies.get(n, 0.))
            
        else:
        
            name = ensemble.names[0]
        
        return cls(ensemble.members[name])


def perceptual_features(extractor, x):
    
    if x.dim() != 4:
    
        raise raeg.errors.ShapeError("Expected an image batch [B, C, H, W], got " + str(tuple(x.shape)))
    
    return extractor(x)
