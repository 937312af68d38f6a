""" **training.py** trains the target classifiers and the full RAEG system.

`pretrain_targets` trains every target classifier on clean images, with early stopping on a
validation subset, and returns the frozen ensemble.

`RAEGTrainer` owns the generator, the discriminator, their optimizers and all training state.
Like a time-dependent simulation, it is advanced step by step (`train_step`) and epoch by epoch
(`train`), and it can write and read checkpoints from which training resumes exactly.
Each iteration
    
    1. protects the batch, I_prt = G(I),
    2. quantizes it to 8 bits with a straight-through gradient, I_q,
    3. attacks I_q with a sampled attack, I_atk,
    4. recovers Î = G^-1(I_q),
    5. updates the discriminator on loss_dis(I, I_q),
    6. updates the generator on prt + beta*rev + gamma*cls + delta*gan.
"""
import raeg
import csv
import dataclasses
import math
import pathlib
import typing
import torch


@dataclasses.dataclass
class TrainConfig:
    """ Hyperparameters of the adversarial training loop. """
    lr: float = 1.e-4
    
    discriminator_lr: float = 1.e-4
    
    beta1: float = 0.9
    
    beta2: float = 0.999
    
    batch_size: int = 8
    
    epochs: int = 20
    
    seed: int = 0
    
    device: str = "auto"
    
    checkpoint_every: int = 1
    
    log_every: int = 10
    
    max_steps_per_epoch: typing.Optional[int] = None
    
    num_workers: int = 0
    
    weights: raeg.losses.LossWeights = dataclasses.field(default_factory = raeg.losses.LossWeights)
    
    attacks: raeg.defense_simulation.AttackStrengths = dataclasses.field(
        default_factory = raeg.defense_simulation.AttackStrengths)
    
    grad_norms: bool = False
    
    verbose: bool = True
    
    plot: bool = True
    
    def __post_init__(self):
    
        if not (self.lr > 0.) or not (self.discriminator_lr > 0.):
        
            raise raeg.errors.ConfigError("Learning rates must be positive", keys = ("optimizer.lr",))
        
        if self.batch_size < 1:
        
            raise raeg.errors.ConfigError("batch_size must be at least 1", keys = ("data.batch_size",))
        
        if self.epochs < 0:
        
            raise raeg.errors.ConfigError("epochs must be nonnegative", keys = ("training.epochs",))
    
    @classmethod
    def from_config(cls, cfg):
    
        return cls(
            lr = float(cfg["optimizer"]["lr"]),
            discriminator_lr = float(cfg["optimizer"]["discriminator_lr"]),
            beta1 = float(cfg["optimizer"]["beta1"]),
            beta2 = float(cfg["optimizer"]["beta2"]),
            batch_size = int(cfg["data"]["batch_size"]),
            epochs = int(cfg["training"]["epochs"]),
            seed = int(cfg["training"]["seed"]),
            device = cfg["training"]["device"],
            checkpoint_every = int(cfg["training"]["checkpoint_every"]),
            log_every = int(cfg["logging"]["log_every"]),
            max_steps_per_epoch = cfg["training"]["max_steps_per_epoch"],
            num_workers = int(cfg["data"]["num_workers"]),
            weights = raeg.losses.LossWeights.from_config(cfg),
            attacks = raeg.defense_simulation.AttackStrengths.from_config(cfg),
            grad_norms = bool(cfg["logging"]["grad_norms"]),
            verbose = bool(cfg["logging"]["verbose"]),
            plot = bool(cfg["logging"]["plot"]))
    
    def fingerprint(self):
        """ The settings which must agree for a resumed run to continue the same trajectory. """
        return {
            "lr": self.lr,
            "discriminator_lr": self.discriminator_lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "max_steps_per_epoch": self.max_steps_per_epoch,
            "weights": self.weights.to_dict(),
            "attacks": _jsonable(dataclasses.asdict(self.attacks))}


def _jsonable(value):
    
    if isinstance(value, dict):
    
        return {key: _jsonable(v) for key, v in value.items()}
    
    if isinstance(value, (list, tuple)):
    
        return [_jsonable(v) for v in value]
    
    return value


@dataclasses.dataclass
class TargetTrainConfig:
    """ Settings of the target classifier pretraining. """
    architectures: typing.Sequence[str] = ("plain", "residual", "dense")
    
    held_out: typing.Optional[str] = None
    
    width: int = 32
    
    batch_size: int = 32
    
    lr: float = 1.e-3
    
    max_epochs: int = 30
    
    patience: int = 3
    
    seed: int = 0
    
    device: str = "auto"
    
    num_workers: int = 0
    
    verbose: bool = True
    
    @classmethod
    def from_config(cls, cfg):
    
        targets = cfg["targets"]
        
        return cls(
            architectures = tuple(targets["architectures"]),
            held_out = targets["held_out"],
            width = int(targets["width"]),
            batch_size = int(targets["batch_size"]),
            lr = float(targets["lr"]),
            max_epochs = int(targets["max_epochs"]),
            patience = int(targets["patience"]),
            seed = int(cfg["training"]["seed"]),
            device = cfg["training"]["device"],
            num_workers = int(cfg["data"]["num_workers"]),
            verbose = bool(cfg["logging"]["verbose"]))


def random_horizontal_flip(images, generator):
    
    flip = torch.rand(images.shape[0], generator = generator) < 0.5
    
    return torch.where(flip.view(-1, 1, 1, 1).to(images.device), images.flip(-1), images)


def evaluate_classifier(classifier, dataset, batch_size = 64, device = None):
    """ Top-1 accuracy of `classifier` on a dataset of (image, label) pairs. """
    device = device or next(classifier.parameters()).device
    
    was_training = classifier.training
    
    classifier.eval()
    
    correct = 0
    
    total = 0
    
    with torch.no_grad():
    
        for images, labels in raeg.datasets.make_loader(dataset, batch_size, shuffle = False):
        
            predictions = classifier(images.to(device)).argmax(dim = 1).cpu()
            
            correct += int((predictions == labels).sum())
            
            total += labels.shape[0]
    
    classifier.train(was_training)
    
    return correct/max(total, 1)


def train_classifier(
        classifier, 
        train_set, 
        validation_set, 
        config, 
        name = "classifier", 
        table_path = None):
    """ Train one classifier with Adam and cross entropy, keeping the parameters with the best
    validation accuracy and stopping after `config.patience` epochs without improvement. 
    """
    device = raeg.helpers.select_device(config.device)
    
    classifier.to(device)
    
    optimizer = torch.optim.Adam(classifier.parameters(), lr = config.lr)
    
    generator = torch.Generator()
    
    generator.manual_seed(config.seed)
    
    best_accuracy = -1.
    
    best_state = None
    
    epochs_without_improvement = 0
    
    for epoch in range(config.max_epochs):
    
        classifier.train()
        
        loader = raeg.datasets.make_loader(
            train_set, config.batch_size, seed = config.seed + epoch, num_workers = config.num_workers)
        
        running_loss = 0.
        
        for images, labels in loader:
        
            images = random_horizontal_flip(images, generator).to(device)
            
            loss = torch.nn.functional.cross_entropy(classifier(images), labels.to(device))
            
            optimizer.zero_grad()
            
            loss.backward()
            
            optimizer.step()
            
            running_loss += float(loss.detach())*labels.shape[0]
        
        accuracy = evaluate_classifier(classifier, validation_set, device = device)
        
        if config.verbose:
        
            print("Target '" + name + "', epoch " + str(epoch) + ": validation accuracy = " + "%.4f" % accuracy)
        
        if table_path is not None:
        
            _append_row(table_path, 
                ["name", "epoch", "train_loss", "validation_accuracy"],
                [name, epoch, running_loss/max(len(train_set), 1), accuracy])
        
        if accuracy > best_accuracy:
        
            best_accuracy = accuracy
            
            best_state = {key: value.detach().clone() for key, value in classifier.state_dict().items()}
            
            epochs_without_improvement = 0
            
        else:
        
            epochs_without_improvement += 1
            
            if epochs_without_improvement >= config.patience:
            
                break
    
    if best_state is not None:
    
        classifier.load_state_dict(best_state)
    
    return best_accuracy


def split_validation(dataset, fraction = 0.1, seed = 0):
    """ Split `dataset` into disjoint (train, validation) subsets by a seeded permutation. """
    generator = torch.Generator()
    
    generator.manual_seed(seed)
    
    permutation = torch.randperm(len(dataset), generator = generator).tolist()
    
    count = max(1, int(round(len(dataset)*fraction)))
    
    return torch.utils.data.Subset(dataset, permutation[count:]), torch.utils.data.Subset(dataset, permutation[:count])


def pretrain_targets(train_set, test_set, num_classes, config = None, output_dir = None):
    """ Train every configured architecture on clean images and return the frozen ensemble.
    
    Parameters
    ----------
    train_set, test_set : torch.utils.data.Dataset
    
        Datasets of (image, label) pairs.
    
    num_classes : int
    
    config : TargetTrainConfig
    
    output_dir : string, optional
    
        Directory for the "target_pretraining.csv" table.
    """
    config = config or TargetTrainConfig()
    
    if len(train_set) == 0 or len(test_set) == 0:
    
        raise raeg.errors.DatasetError("Target pretraining needs nonempty train and test splits")
    
    if num_classes < 2:
    
        raise raeg.errors.DatasetError("Classification needs at least 2 classes, got " + str(num_classes))
    
    raeg.helpers.seed_everything(config.seed)
    
    table_path = None
    
    if output_dir is not None:
    
        table_path = raeg.helpers.mkdir_p(output_dir)/"target_pretraining.csv"
    
    fit_set, validation_set = split_validation(train_set, seed = config.seed)
    
    names = list(config.architectures)
    
    if config.held_out is not None:
    
        names.append(config.held_out)
    
    members = {}
    
    held_out = {}
    
    accuracies = {}
    
    for index, architecture in enumerate(names):
    
        is_held_out = (config.held_out is not None) and (index == len(names) - 1)
        
        name = ("held_out_" if is_held_out else "") + architecture
        
        torch.manual_seed(config.seed + index)
        
        classifier = raeg.targets.build_classifier(architecture, num_classes, config.width)
        
        train_classifier(classifier, fit_set, validation_set, config, name = name, table_path = table_path)
        
        accuracies[name] = evaluate_classifier(classifier, test_set)
        
        if config.verbose:
        
            print("Target '" + name + "': clean test accuracy = " + "%.4f" % accuracies[name])
        
        (held_out if is_held_out else members)[name] = classifier
    
    ensemble = raeg.targets.ClassifierEnsemble(members, num_classes, held_out = held_out)
    
    ensemble.clean_accuracies = accuracies
    
    return ensemble.freeze()


def _append_row(path, header, row):
    """ Append `row` to the CSV table at `path`, writing `header` first if the file is new. """
    path = pathlib.Path(path)
    
    new = not path.exists()
    
    with open(str(path), "a", newline = "") as table_file:
    
        writer = csv.writer(table_file)
        
        if new:
        
            writer.writerow(header)
        
        writer.writerow(row)


def _generator_gradient_norms(terms, parameters):
    """ Norm of the gradient of each weighted term with respect to the generator parameters. """
    norms = {}
    
    for name, term in terms.items():
    
        if not (torch.is_tensor(term) and term.requires_grad):
        
            continue
        
        gradients = torch.autograd.grad(term, parameters, retain_graph = True, allow_unused = True)
        
        squared = sum(float((g.detach()**2).sum()) for g in gradients if g is not None)
        
        norms[name] = math.sqrt(squared)
    
    return norms


def train_step(
        generator, 
        discriminator, 
        ensemble, 
        extractor, 
        batch, 
        cfg, 
        rng, 
        generator_optimizer, 
        discriminator_optimizer = None,
        grad_norms = False):
    """ Run one training iteration and return its `raeg.losses.LossReport`.
    
    The discriminator is only used (and updated) when `cfg.weights.delta` is nonzero,
    the ensemble only when `cfg.weights.gamma` is nonzero. Disabled terms are reported as zero.
    The applied attack specs are available as `report.attacks`.
    """
    weights = cfg.weights
    
    images, labels = batch
    
    device = next(generator.parameters()).device
    
    images = images.to(device)
    
    labels = labels.to(device)
    
    if ensemble is not None:
    
        assert(ensemble.frozen)
    
    generator.train()
    
    protected = generator.protect(images)
    
    quantized = raeg.generator.quantize_straight_through(protected)
    
    attacked, specs = raeg.defense_simulation.sample_and_apply(quantized, rng, cfg.attacks)
    
    recovered = generator.recover(quantized)
    
    use_discriminator = (discriminator is not None) and (weights.delta != 0.)
    
    dis = 0.
    
    if use_discriminator:
    
        discriminator.train()
        
        discriminator.requires_grad_(True)
        
        dis = raeg.losses.loss_dis(discriminator, images, quantized.detach())
        
        if not math.isfinite(float(dis.detach())):
        
            raise raeg.errors.NonFiniteLossError("dis", float(dis.detach()))
        
        discriminator_optimizer.zero_grad()
        
        dis.backward()
        
        discriminator_optimizer.step()
        
        discriminator.requires_grad_(False)
    
    components = {
        "prt": raeg.losses.loss_prt(images, protected),
        "dis": dis}
    
    pixel = (images - recovered).abs().mean()
    
    if (weights.alpha != 0.) and (extractor is not None):
    
        per = raeg.losses.perceptual_distance(extractor, images, recovered)
        
        components["per"] = per
        
        components["rev"] = weights.alpha*per + pixel
        
    else:
    
        components["rev"] = pixel
    
    if (weights.gamma != 0.) and (ensemble is not None):
    
        components["cls"] = raeg.losses.loss_cls(ensemble, recovered, attacked, labels, weights.epsilon)
        
    else:
    
        components["cls"] = 0.
    
    if use_discriminator:
    
        components["gan"] = raeg.losses.loss_gan(discriminator, quantized)
        
    else:
    
        components["gan"] = 0.
    
    report = raeg.losses.loss_total(components, weights)
    
    if grad_norms:
    
        report.grad_norms = _generator_gradient_norms({
                "prt": components["prt"],
                "rev": weights.beta*components["rev"],
                "cls": weights.gamma*components["cls"] if torch.is_tensor(components["cls"]) else 0.,
                "gan": weights.delta*components["gan"] if torch.is_tensor(components["gan"]) else 0.},
            [p for p in generator.parameters() if p.requires_grad])
    
    generator_optimizer.zero_grad()
    
    report.graph.backward()
    
    generator_optimizer.step()
    
    report.graph = None
    
    report.attacks = specs
    
    return report


LOSS_TABLE_HEADER = ["step", "epoch", "attack"] + list(raeg.losses.LossReport.TERMS) \
    + ["grad_prt", "grad_rev", "grad_cls", "grad_gan"]


class RAEGTrainer:
    """ The adversarial training loop of the whole system.
    
    Parameters
    ----------
    generator : raeg.generator.InvertibleGenerator
    
    discriminator : raeg.targets.Discriminator or None
    
    ensemble : raeg.targets.ClassifierEnsemble or None
    
        Frozen target classifiers.
    
    extractor : raeg.targets.FeatureExtractor or None
    
    config : TrainConfig
    
    output_dir : string
    """
    def __init__(self, generator, discriminator, ensemble, extractor, config = None, output_dir = None):
    
        self.config = config or TrainConfig()
        
        self.device = raeg.helpers.select_device(self.config.device)
        
        self.generator = generator.to(self.device)
        
        self.discriminator = discriminator.to(self.device) if discriminator is not None else None
        
        self.ensemble = ensemble.to(self.device) if ensemble is not None else None
        
        self.extractor = extractor.to(self.device) if extractor is not None else None
        
        if (self.ensemble is not None) and not self.ensemble.frozen:
        
            raise raeg.errors.ConfigError("The target ensemble must be frozen before training the generator")
        
        self.generator_optimizer = torch.optim.Adam(
            self.generator.parameters(), 
            lr = self.config.lr, 
            betas = (self.config.beta1, self.config.beta2))
        
        self.discriminator_optimizer = None
        
        if self.discriminator is not None:
        
            self.discriminator_optimizer = torch.optim.Adam(
                self.discriminator.parameters(),
                lr = self.config.discriminator_lr,
                betas = (self.config.beta1, self.config.beta2))
        
        self.rng = torch.Generator()
        
        self.rng.manual_seed(self.config.seed)
        
        self.step = 0
        
        self.epoch = 0
        
        self.output_dir = output_dir
        
        self.loss_table_filename = "loss_curve.csv"
        
        self.history = []
        
    @property
    def loss_table_path(self):
    
        if self.output_dir is None:
        
            return None
        
        return pathlib.Path(self.output_dir)/self.loss_table_filename
        
    def train_step(self, batch):
        """ Run one iteration, advance the step counter, and log the report every `log_every` steps. """
        log = (self.step % max(self.config.log_every, 1) == 0)
        
        try:
        
            report = train_step(
                self.generator, 
                self.discriminator, 
                self.ensemble, 
                self.extractor, 
                batch, 
                self.config, 
                self.rng, 
                self.generator_optimizer, 
                self.discriminator_optimizer,
                grad_norms = log and self.config.grad_norms)
                
        except raeg.errors.NonFiniteLossError as error:
        
            print("Aborting training at step " + str(self.step) + ": " + str(error))
            
            raise
        
        if log:
        
            self.write_loss_table_row(report)
        
        self.step += 1
        
        return report
    
    def write_loss_table_row(self, report):
    
        row = report.as_row()
        
        self.history.append(dict(row, step = self.step, epoch = self.epoch))
        
        if self.config.verbose:
        
            print("Step " + str(self.step) + ": " + ", ".join(
                term + " = " + "%.5g" % row[term] for term in raeg.losses.LossReport.TERMS))
        
        if self.loss_table_path is None:
        
            return
        
        values = dict(row, step = self.step, epoch = self.epoch, 
            attack = "; ".join(spec.describe() for spec in report.attacks))
        
        _append_row(self.loss_table_path, LOSS_TABLE_HEADER, [values.get(key, "") for key in LOSS_TABLE_HEADER])
    
    def train(self, train_set, epochs = None, callback = None):
        """ Train until `epochs` epochs are complete, continuing from the current epoch.
        
        Writes a trainer checkpoint every `checkpoint_every` epochs and the final generator to
        "generator.raeg" in the output directory. `callback(trainer)` runs after every epoch.
        Returns the generator.
        """
        epochs = self.config.epochs if epochs is None else epochs
        
        if self.output_dir is not None:
        
            raeg.helpers.mkdir_p(self.output_dir)
        
        ensemble_digest = raeg.helpers.parameters_digest(self.ensemble) if self.ensemble is not None else None
        
        while self.epoch < epochs:
        
            loader = raeg.datasets.make_loader(
                train_set, 
                self.config.batch_size, 
                seed = self.config.seed*100003 + self.epoch, 
                num_workers = self.config.num_workers,
                drop_last = len(train_set) >= self.config.batch_size)
            
            for batch_index, batch in enumerate(loader):
            
                if (self.config.max_steps_per_epoch is not None) and (batch_index >= self.config.max_steps_per_epoch):
                
                    break
                
                self.train_step(batch)
            
            self.epoch += 1
            
            if self.config.verbose:
            
                print("Finished epoch " + str(self.epoch) + " of " + str(epochs))
            
            if (self.output_dir is not None) and (self.epoch % max(self.config.checkpoint_every, 1) == 0):
            
                self.write_checkpoint(pathlib.Path(self.output_dir)/"trainer.raeg")
            
            if callback is not None:
            
                callback(self)
        
        if (ensemble_digest is not None) and (raeg.helpers.parameters_digest(self.ensemble) != ensemble_digest):
        
            raise raeg.errors.RAEGError("The frozen target ensemble was modified during training")
        
        if self.output_dir is not None:
        
            self.generator.write_checkpoint(
                pathlib.Path(self.output_dir)/"generator.raeg", 
                metadata = self.metadata())
            
            if self.config.plot and (self.loss_table_path is not None) and self.loss_table_path.exists():
            
                raeg.plotting.plot_loss_curves(self.loss_table_path, pathlib.Path(self.output_dir)/"loss_curve.png")
        
        return self.generator
    
    def metadata(self):
    
        return {
            "step": self.step,
            "epoch": self.epoch,
            "loss_weights": self.config.weights.to_dict(),
            "train_config": self.config.fingerprint()}
    
    def write_checkpoint(self, filepath):
        """ Write the generator, discriminator, optimizer states, counters and RNG state. """
        print("Writing checkpoint to " + str(filepath))
        
        tensors = {}
        
        for name, tensor in self.generator.state_dict().items():
        
            tensors["generator." + name] = tensor
        
        if self.discriminator is not None:
        
            for name, tensor in self.discriminator.state_dict().items():
            
                tensors["discriminator." + name] = tensor
        
        optimizer_groups = {}
        
        for prefix, optimizer in (("generator_optimizer", self.generator_optimizer), 
                ("discriminator_optimizer", self.discriminator_optimizer)):
        
            if optimizer is None:
            
                continue
            
            state = optimizer.state_dict()
            
            optimizer_groups[prefix] = _jsonable(state["param_groups"])
            
            for index, parameter_state in state["state"].items():
            
                for key, value in parameter_state.items():
                
                    tensors[prefix + "." + str(index) + "." + key] = value if torch.is_tensor(value) else torch.tensor(value)
        
        tensors["rng_state"] = self.rng.get_state()
        
        metadata = self.metadata()
        
        metadata["optimizer_param_groups"] = optimizer_groups
        
        metadata["has_discriminator"] = self.discriminator is not None
        
        raeg.archive.write_archive(
            filepath, 
            tensors, 
            kind = "trainer", 
            config = {"generator": self.generator.config.to_dict()},
            metadata = metadata)
    
    def read_checkpoint(self, filepath):
        """ Restore the state written by `write_checkpoint`.
        
        Raises `raeg.errors.ConfigMismatchError` if the checkpoint was written with a different 
        generator architecture or training configuration.
        """
        print("Reading checkpoint from " + str(filepath))
        
        manifest, tensors = raeg.archive.read_archive(filepath, kind = "trainer")
        
        stored = manifest["config"]["generator"]
        
        current = self.generator.config.to_dict()
        
        for key in current:
        
            if stored.get(key) != current[key]:
            
                raise raeg.errors.ConfigMismatchError("model." + key, current[key], stored.get(key))
        
        metadata = manifest["metadata"]
        
        fingerprint = _jsonable(self.config.fingerprint())
        
        for key, value in fingerprint.items():
        
            if metadata["train_config"].get(key) != value:
            
                raise raeg.errors.ConfigMismatchError(key, value, metadata["train_config"].get(key))
        
        if metadata["has_discriminator"] != (self.discriminator is not None):
        
            raise raeg.errors.ConfigMismatchError("discriminator", self.discriminator is not None, metadata["has_discriminator"])
        
        def extract(prefix):
        
            return {name[len(prefix):]: tensor for name, tensor in tensors.items() if name.startswith(prefix)}
        
        raeg.archive.load_state_dict(self.generator, extract("generator."), filepath)
        
        if self.discriminator is not None:
        
            raeg.archive.load_state_dict(self.discriminator, extract("discriminator."), filepath)
        
        for prefix, optimizer in (("generator_optimizer", self.generator_optimizer), 
                ("discriminator_optimizer", self.discriminator_optimizer)):
        
            if optimizer is None:
            
                continue
            
            state = {}
            
            for name, tensor in extract(prefix + ".").items():
            
                index, key = name.split(".", 1)
                
                state.setdefault(int(index), {})[key] = tensor.to(self.device) if key != "step" else tensor
            
            optimizer.load_state_dict({
                "state": state, 
                "param_groups": metadata["optimizer_param_groups"][prefix]})
        
        self.rng.set_state(tensors["rng_state"])
        
        self.step = metadata["step"]
        
        self.epoch = metadata["epoch"]


def build_trainer(cfg, ensemble, output_dir = None, weights = None):
    """ Construct a fresh generator, discriminator, feature extractor and trainer from a config.
    
    `weights` overrides the loss weights of the config; with delta = 0 no discriminator is built.
    """
    config = TrainConfig.from_config(cfg)
    
    if weights is not None:
    
        config.weights = weights
    
    raeg.helpers.seed_everything(config.seed)
    
    generator = raeg.generator.InvertibleGenerator(raeg.generator.GeneratorConfig.from_config(cfg))
    
    discriminator = None
    
    if config.weights.delta != 0.:
    
        discriminator = raeg.targets.Discriminator(
            width = int(cfg["model"]["discriminator_width"]),
            downsamplings = raeg.targets.discriminator_downsamplings(int(cfg["data"]["image_size"])))
    
    extractor = None
    
    if (config.weights.alpha != 0.) and (ensemble is not None):
    
        extractor = raeg.targets.FeatureExtractor.from_ensemble(ensemble)
    
    return RAEGTrainer(generator, discriminator, ensemble, extractor, config = config, output_dir = output_dir)


def train_raeg(cfg, train_set, ensemble, output_dir = None, weights = None, epochs = None, resume = True):
    """ Train a generator according to `cfg`, resuming from "trainer.raeg" in `output_dir` if present. 
    
    Returns the trainer, whose generator is left in evaluation mode.
    """
    trainer = build_trainer(cfg, ensemble, output_dir = output_dir, weights = weights)
    
    if resume and (output_dir is not None):
    
        checkpoint = pathlib.Path(output_dir)/"trainer.raeg"
        
        if checkpoint.is_file():
        
            trainer.read_checkpoint(checkpoint)
    
    trainer.train(train_set, epochs = epochs)
    
    trainer.generator.eval()
    
    return trainer
