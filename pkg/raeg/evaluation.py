""" **evaluation.py** measures protection, recovery and robustness.

The metrics are PSNR and SSIM with data range 1. The real-attack battery applies
non-differentiable operations (a JPEG codec, resizing, 8-bit Gaussian noise and a median filter)
and, optionally, external defense commands.

The table-level protocols are

- `evaluate`: accuracy on clean, protected and recovered images, and the visual quality of the
  protected and recovered images (columns A_ori, A_prt, A_rev, P_prt, P_rev, S_prt, S_rev),
- `evaluate_robustness`: accuracy of every target, including held-out ones, on each battery output,
- `evaluate_inversion_under_attack`: recovery quality from attacked protected images,
- `retrain_pirate`: test accuracy of a fresh classifier trained on protected, defended or recovered images,
- `ablation_suite` and `tradeoff_sweep`: retrain the generator under other settings and compare.

Every protocol returns an `EvalReport`, which can be written as JSON and CSV.
"""
import raeg
import csv
import dataclasses
import io
import json
import math
import pathlib
import shlex
import subprocess
import tempfile
import typing
import numpy
import PIL.Image
import scipy.ndimage
import skimage.metrics
import torch


SSIM_WINDOW = 11

SSIM_SIGMA = 1.5

SSIM_K1 = 0.01

SSIM_K2 = 0.03

PIRATE_VARIANTS = ("protected", "protected+defense", "recovered")

ABLATION_TOGGLES = ("no_discriminator", "no_perceptual", "single_target")


def _check_pair(a, b):
    
    if a.shape != b.shape:
    
        raise raeg.errors.ShapeError("Shape mismatch: " + str(tuple(a.shape)) + " vs " + str(tuple(b.shape)))


def psnr(a, b):
    """ Peak signal to noise ratio in dB for data range 1, over the whole batch.
    
    Identical inputs give `math.inf`.
    """
    _check_pair(a, b)
    
    mse = float(((a.double() - b.double())**2).mean())
    
    if mse == 0.:
    
        return math.inf
        
    return 10.*math.log10(1./mse)


def psnr_per_image(a, b):
    
    _check_pair(a, b)
    
    return [psnr(a[i], b[i]) for i in range(a.shape[0])]


def ssim_per_image(a, b):
    """ SSIM of every image pair of two [B, C, H, W] batches, averaged over channels. """
    _check_pair(a, b)
    
    if a.dim() != 4:
    
        raise raeg.errors.ShapeError("Expected image batches [B, C, H, W], got " + str(tuple(a.shape)))
        
    if (a.shape[2] < SSIM_WINDOW) or (a.shape[3] < SSIM_WINDOW):
    
        raise raeg.errors.ShapeError(
            "SSIM needs images of at least " + str(SSIM_WINDOW) + "x" + str(SSIM_WINDOW)
            + ", got " + str(tuple(a.shape[2:])))
            
    x = a.detach().double().cpu().numpy()
    
    y = b.detach().double().cpu().numpy()
    
    return [
        float(skimage.metrics.structural_similarity(
            x[i], y[i],
            data_range = 1.,
            channel_axis = 0,
            gaussian_weights = True,
            sigma = SSIM_SIGMA,
            use_sample_covariance = False,
            K1 = SSIM_K1,
            K2 = SSIM_K2))
        for i in range(x.shape[0])]


def ssim(a, b):
    """ Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 and data range 1.
    
    Accepts [C, H, W] images or [B, C, H, W] batches.
    """
    if a.dim() == 3:
    
        a, b = a.unsqueeze(0), b.unsqueeze(0)
        
    values = ssim_per_image(a, b)
    
    return sum(values)/len(values)


def metric_stats(values):
    """ Mean and standard deviation of finite values, with the count of infinite ones.
    
    If every value is infinite, the mean is infinite.
    """
    finite = [v for v in values if math.isfinite(v)]
    
    infinite = len(values) - len(finite)
    
    if not finite:
    
        return {"mean": math.inf if infinite else math.nan, "std": 0., "count": len(values), "infinite": infinite}
        
    return {
        "mean": float(numpy.mean(finite)),
        "std": float(numpy.std(finite)),
        "count": len(values),
        "infinite": infinite}


@dataclasses.dataclass
class EvalConfig:
    """ Settings of the real-attack battery and the evaluation protocols. """
    jpeg_qualities: typing.Sequence[int] = (90, 50)
    
    resize_factor: float = 0.5
    
    noise_sigma: float = 0.02
    
    median_size: int = 3
    
    batch_size: int = 32
    
    seed: int = 0
    
    external_defenses: typing.Dict[str, str] = dataclasses.field(default_factory = dict)
    
    pirate_architecture: str = "residual"
    
    pirate_epochs: int = 10
    
    pirate_defense: str = "jpeg50"
    
    sweep_gammas: typing.Sequence[float] = (0.001, 0.005, 0.02)
    
    def __post_init__(self):
    
        for quality in self.jpeg_qualities:
        
            if not (1 <= int(quality) <= 100):
            
                raise raeg.errors.ConfigError(
                    "Codec JPEG quality must lie in [1, 100], got " + str(quality), keys = ("eval.jpeg_qualities",))
                    
        if not (0. < self.resize_factor <= 1.):
        
            raise raeg.errors.ConfigError("resize_factor must lie in (0, 1]", keys = ("eval.resize_factor",))
            
        if self.noise_sigma < 0.:
        
            raise raeg.errors.ConfigError("noise_sigma must be nonnegative", keys = ("eval.noise_sigma",))
            
        if self.median_size < 1:
        
            raise raeg.errors.ConfigError("median_size must be positive", keys = ("eval.median_size",))
            
    @classmethod
    def from_config(cls, cfg):
    
        e = cfg["eval"]
        
        return cls(
            jpeg_qualities = tuple(int(q) for q in e["jpeg_qualities"]),
            resize_factor = float(e["resize_factor"]),
            noise_sigma = float(e["noise_sigma"]),
            median_size = int(e["median_size"]),
            batch_size = int(e["batch_size"]),
            seed = int(cfg["training"]["seed"]),
            external_defenses = dict(e["external_defenses"]),
            pirate_architecture = e["pirate_architecture"],
            pirate_epochs = int(e["pirate_epochs"]),
            pirate_defense = e["pirate_defense"],
            sweep_gammas = tuple(float(g) for g in e["sweep_gammas"]))
            
    def defenses(self):
    
        return [ExternalDefense(name, command) for name, command in sorted(self.external_defenses.items())]


def _to_uint8_batch(x):
    
    return torch.round(x.detach().clamp(0., 1.)*255.).to(torch.uint8).permute(0, 2, 3, 1).cpu().numpy()


def _from_uint8_batch(array, like):
    
    return (torch.from_numpy(numpy.ascontiguousarray(array)).permute(0, 3, 1, 2).to(like.dtype)/255.).to(like.device)


def real_jpeg(x, quality):
    """ Encode and decode every image with the Pillow JPEG codec. """
    images = _to_uint8_batch(x)
    
    decoded = []
    
    for array in images:
    
        buffer = io.BytesIO()
        
        try:
        
            PIL.Image.fromarray(array).save(buffer, format = "JPEG", quality = int(quality))
            
            buffer.seek(0)
            
            with PIL.Image.open(buffer) as image:
            
                decoded.append(numpy.asarray(image.convert("RGB"), dtype = numpy.uint8))
                
        except (OSError, KeyError) as error:
        
            raise raeg.errors.DefenseUnavailableError("JPEG codec unavailable: " + str(error))
            
    return _from_uint8_batch(numpy.stack(decoded), x)


def real_resize(x, factor):
    """ Downscale by `factor` and upscale back with bilinear interpolation, in 8 bits. """
    images = _to_uint8_batch(x)
    
    H, W = images.shape[1:3]
    
    small = (max(1, int(round(W*factor))), max(1, int(round(H*factor))))
    
    resized = [
        numpy.asarray(
            PIL.Image.fromarray(array).resize(small, PIL.Image.BILINEAR).resize((W, H), PIL.Image.BILINEAR),
            dtype = numpy.uint8)
        for array in images]
        
    return _from_uint8_batch(numpy.stack(resized), x)


def real_noise(x, sigma, generator):
    """ Add Gaussian noise and round back to 8 bits. """
    noise = torch.randn(x.shape, generator = generator, dtype = torch.float64)
    
    noisy = x.detach().double().cpu() + sigma*noise
    
    return raeg.generator.quantize(noisy).to(x.dtype).to(x.device)


def real_median(x, size):
    """ Channel-wise median filter with a size x size window. """
    images = _to_uint8_batch(x)
    
    filtered = scipy.ndimage.median_filter(images, size = (1, size, size, 1), mode = "reflect")
    
    return _from_uint8_batch(filtered, x)


class ExternalDefense:
    """ A defense implemented by an external command.
    
    The command is run as `command <in_dir> <out_dir>`. It must write one image to `out_dir`
    for every PNG file in `in_dir`, under the same file name.
    """
    def __init__(self, name, command, timeout = None):
    
        self.name = name
        
        self.command = command
        
        self.timeout = timeout
        
    def __call__(self, x):
    
        with tempfile.TemporaryDirectory() as workspace:
        
            in_dir = raeg.helpers.mkdir_p(pathlib.Path(workspace)/"in")
            
            out_dir = raeg.helpers.mkdir_p(pathlib.Path(workspace)/"out")
            
            names = ["image_" + str(i).zfill(6) + ".png" for i in range(x.shape[0])]
            
            for name, image in zip(names, x):
            
                raeg.datasets.write_image(image, in_dir/name)
                
            try:
            
                subprocess.run(
                    shlex.split(self.command) + [str(in_dir), str(out_dir)],
                    check = True,
                    timeout = self.timeout,
                    stdout = subprocess.DEVNULL)
                    
            except (OSError, subprocess.SubprocessError) as error:
            
                raise raeg.errors.DefenseUnavailableError(
                    "External defense '" + self.name + "' failed: " + str(error))
                    
            try:
            
                images = [raeg.datasets.read_image(out_dir/name) for name in names]
                
            except OSError as error:
            
                raise raeg.errors.DefenseUnavailableError(
                    "External defense '" + self.name + "' produced no readable output: " + str(error))
                    
        return torch.stack(images).to(x.dtype).to(x.device)


def battery_names(config):
    """ The battery columns in their fixed order. """
    return ["identity"] + ["jpeg" + str(int(q)) for q in config.jpeg_qualities] \
        + ["resize", "noise", "median"] + sorted(config.external_defenses)


def real_attack_battery(x, config = None, generator = None, warnings = None):
    """ Apply every real attack and defense of the battery to the 8-bit image batch `x`.
    
    Returns a dict from attack names (see `battery_names`) to attacked batches.
    An attack whose codec or command is unavailable is skipped, and a message is appended to `warnings`.
    """
    config = config or EvalConfig()
    
    if generator is None:
    
        generator = torch.Generator()
        
        generator.manual_seed(config.seed)
        
    attacks = [("identity", lambda: x)]
    
    for quality in config.jpeg_qualities:
    
        attacks.append(("jpeg" + str(int(quality)), lambda q = quality: real_jpeg(x, q)))
        
    attacks += [
        ("resize", lambda: real_resize(x, config.resize_factor)),
        ("noise", lambda: real_noise(x, config.noise_sigma, generator)),
        ("median", lambda: real_median(x, config.median_size))]
        
    for defense in config.defenses():
    
        attacks.append((defense.name, lambda d = defense: d(x)))
        
    outputs = {}
    
    for name, attack in attacks:
    
        try:
        
            outputs[name] = attack()
            
        except raeg.errors.DefenseUnavailableError as error:
        
            message = "Skipped attack '" + name + "': " + str(error)
            
            print("Warning: " + message)
            
            if warnings is not None:
            
                warnings.append(message)
                
    return outputs


@dataclasses.dataclass
class EvalReport:
    """ The outcome of an evaluation protocol.
    
    Parameters
    ----------
    columns : dict
    
        The table columns, e.g. {"A_ori": 0.98, "A_prt": 0.47, "P_prt": 27.3, ...}.
        
    accuracies : dict
    
        Maps each condition (e.g. "clean", "protected", "jpeg50") to a dict from classifier names
        to Top-1 accuracy. "mean" is the mean over the training ensemble members,
        "held_out_mean" the mean over held-out members.
        
    stats : dict
    
        Maps metric names (e.g. "P_prt") to {"mean", "std", "count", "infinite"}.
        
    warnings : list of strings
    
    metadata : dict
    """
    columns: typing.Dict[str, float] = dataclasses.field(default_factory = dict)
    
    accuracies: typing.Dict[str, typing.Dict[str, float]] = dataclasses.field(default_factory = dict)
    
    stats: typing.Dict[str, typing.Dict[str, float]] = dataclasses.field(default_factory = dict)
    
    warnings: typing.List[str] = dataclasses.field(default_factory = list)
    
    metadata: typing.Dict[str, typing.Any] = dataclasses.field(default_factory = dict)
    
    def to_dict(self):
    
        return dataclasses.asdict(self)
        
    @classmethod
    def from_dict(cls, data):
    
        return cls(**{field.name: data.get(field.name, field.default_factory()) for field in dataclasses.fields(cls)})
        
    def to_json(self):
    
        return json.dumps(self.to_dict(), indent = 2, sort_keys = True)
        
    def write_json(self, path):
    
        path = pathlib.Path(path)
        
        raeg.helpers.mkdir_p(path.parent)
        
        with open(str(path), "w") as report_file:
        
            report_file.write(self.to_json() + "\n")
            
    @classmethod
    def read_json(cls, path):
    
        with open(str(path)) as report_file:
        
            return cls.from_dict(json.load(report_file))
            
    def write_csv(self, path):
        """ Write one row per column, accuracy and metric statistic, as (section, key, name, value). """
        path = pathlib.Path(path)
        
        raeg.helpers.mkdir_p(path.parent)
        
        with open(str(path), "w", newline = "") as table_file:
        
            writer = csv.writer(table_file)
            
            writer.writerow(["section", "key", "name", "value"])
            
            for name, value in sorted(self.columns.items()):
            
                writer.writerow(["columns", "", name, repr(value)])
                
            for condition, accuracies in sorted(self.accuracies.items()):
            
                for name, value in sorted(accuracies.items()):
                
                    writer.writerow(["accuracies", condition, name, repr(value)])
                    
            for metric, stats in sorted(self.stats.items()):
            
                for name, value in sorted(stats.items()):
                
                    writer.writerow(["stats", metric, name, repr(value)])


def dataset_tensors(dataset):
    """ The whole dataset as ([N, 3, H, W] images, [N] labels). """
    if hasattr(dataset, "tensors"):
    
        return dataset.tensors()
        
    images, labels = zip(*[dataset[i] for i in range(len(dataset))])
    
    return torch.stack(images), torch.as_tensor(labels, dtype = torch.int64)


def _batched(function, images, batch_size, device):
    
    outputs = []
    
    with torch.no_grad():
    
        for start in range(0, images.shape[0], batch_size):
        
            outputs.append(function(images[start:start + batch_size].to(device)).cpu())
            
    return torch.cat(outputs, dim = 0)


def protect_images(generator, images, batch_size = 32):
    """ Protected images, quantized to 8 bits. """
    generator.eval()
    
    device = next(generator.parameters()).device
    
    return _batched(lambda x: raeg.generator.quantize(generator.protect(x)), images, batch_size, device)


def recover_images(generator, protected, batch_size = 32):
    
    generator.eval()
    
    device = next(generator.parameters()).device
    
    return _batched(generator.recover, protected, batch_size, device)


def classifier_accuracies(ensemble, images, labels, batch_size = 32, include_held_out = True):
    """ Top-1 accuracy of every member on `images`, with "mean" and, if any, "held_out_mean". """
    device = next(ensemble.parameters()).device
    
    predictions = {}
    
    with torch.no_grad():
    
        for start in range(0, images.shape[0], batch_size):
        
            logits = ensemble.member_logits(images[start:start + batch_size].to(device))
            
            for name, member_logits in logits.items():
            
                predictions.setdefault(name, []).append(member_logits.argmax(dim = 1).cpu())
                
    accuracies = {
        name: float((torch.cat(p) == labels).double().mean()) for name, p in predictions.items()}
        
    members = [accuracies[name] for name in ensemble.members]
    
    result = {name: accuracies[name] for name in ensemble.members}
    
    result["mean"] = sum(members)/len(members)
    
    if include_held_out and len(ensemble.held_out) > 0:
    
        held_out = [accuracies[name] for name in ensemble.held_out]
        
        for name in ensemble.held_out:
        
            result[name] = accuracies[name]
            
        result["held_out_mean"] = sum(held_out)/len(held_out)
        
    return result


def evaluate(generator, ensemble, testset, config = None, metadata = None):
    """ Accuracy on clean, protected and recovered images, and the quality of the latter two. """
    config = config or EvalConfig()
    
    images, labels = dataset_tensors(testset)
    
    protected = protect_images(generator, images, config.batch_size)
    
    recovered = recover_images(generator, protected, config.batch_size)
    
    report = EvalReport(metadata = dict(metadata or {}, protocol = "evaluate", images = int(images.shape[0])))
    
    for condition, batch in (("clean", images), ("protected", protected), ("recovered", recovered)):
    
        report.accuracies[condition] = classifier_accuracies(ensemble, batch, labels, config.batch_size)
        
    report.stats["P_prt"] = metric_stats(psnr_per_image(images, protected))
    
    report.stats["P_rev"] = metric_stats(psnr_per_image(images, recovered))
    
    report.stats["S_prt"] = metric_stats(ssim_per_image(images, protected))
    
    report.stats["S_rev"] = metric_stats(ssim_per_image(images, recovered))
    
    report.columns = {
        "A_ori": report.accuracies["clean"]["mean"],
        "A_prt": report.accuracies["protected"]["mean"],
        "A_rev": report.accuracies["recovered"]["mean"]}
        
    for metric in ("P_prt", "P_rev", "S_prt", "S_rev"):
    
        report.columns[metric] = report.stats[metric]["mean"]
        
    return report


def evaluate_robustness(generator, ensemble, testset, config = None, metadata = None):
    """ Accuracy of every member, including held-out ones, on each real-battery output of the protected images.
    
    The columns are "A_ori", then "A_<attack>" (training ensemble mean) and, with held-out members,
    "A_<attack>_held_out".
    """
    config = config or EvalConfig()
    
    images, labels = dataset_tensors(testset)
    
    protected = protect_images(generator, images, config.batch_size)
    
    report = EvalReport(metadata = dict(metadata or {}, protocol = "evaluate_robustness", images = int(images.shape[0])))
    
    report.accuracies["clean"] = classifier_accuracies(ensemble, images, labels, config.batch_size)
    
    report.columns["A_ori"] = report.accuracies["clean"]["mean"]
    
    if "held_out_mean" in report.accuracies["clean"]:
    
        report.columns["A_ori_held_out"] = report.accuracies["clean"]["held_out_mean"]
        
    battery = real_attack_battery(protected, config, warnings = report.warnings)
    
    for name, attacked in battery.items():
    
        accuracies = classifier_accuracies(ensemble, attacked, labels, config.batch_size)
        
        report.accuracies[name] = accuracies
        
        report.columns["A_" + name] = accuracies["mean"]
        
        if "held_out_mean" in accuracies:
        
            report.columns["A_" + name + "_held_out"] = accuracies["held_out_mean"]
            
    return report


def evaluate_inversion_under_attack(generator, testset, config = None, metadata = None):
    """ Quality of the images recovered from each real-battery output of the protected images. """
    config = config or EvalConfig()
    
    images, _ = dataset_tensors(testset)
    
    protected = protect_images(generator, images, config.batch_size)
    
    report = EvalReport(metadata = dict(metadata or {}, protocol = "inversion_under_attack", images = int(images.shape[0])))
    
    for name, attacked in real_attack_battery(protected, config, warnings = report.warnings).items():
    
        recovered = recover_images(generator, attacked, config.batch_size)
        
        report.stats["P_rev_" + name] = metric_stats(psnr_per_image(images, recovered))
        
        report.stats["S_rev_" + name] = metric_stats(ssim_per_image(images, recovered))
        
        report.columns["P_rev_" + name] = report.stats["P_rev_" + name]["mean"]
        
        report.columns["S_rev_" + name] = report.stats["S_rev_" + name]["mean"]
        
    return report


def pirate_training_images(generator, images, variant, config):
    """ The images a pirate would train on: protected, protected and then defended, or recovered. """
    if variant not in PIRATE_VARIANTS:
    
        raise raeg.errors.ConfigError(
            "Unknown pirate dataset variant '" + str(variant) + "', expected one of " + ", ".join(PIRATE_VARIANTS))
            
    protected = protect_images(generator, images, config.batch_size)
    
    if variant == "protected":
    
        return protected
        
    if variant == "recovered":
    
        return recover_images(generator, protected, config.batch_size)
        
    battery = real_attack_battery(protected, config)
    
    if config.pirate_defense not in battery:
    
        raise raeg.errors.DefenseUnavailableError("Pirate defense '" + config.pirate_defense + "' is unavailable")
        
    return battery[config.pirate_defense]


def retrain_pirate(generator, train_set, test_set, variant, architecture = None, config = None, target_config = None):
    """ Train a fresh classifier on a variant of the training split and return its clean test accuracy. """
    config = config or EvalConfig()
    
    target_config = target_config or raeg.training.TargetTrainConfig(seed = config.seed)
    
    target_config = dataclasses.replace(target_config, max_epochs = config.pirate_epochs)
    
    architecture = architecture or config.pirate_architecture
    
    images, labels = dataset_tensors(train_set)
    
    test_images, test_labels = dataset_tensors(test_set)
    
    num_classes = int(max(int(labels.max()), int(test_labels.max()))) + 1
    
    variant_set = raeg.datasets.TensorSplit(pirate_training_images(generator, images, variant, config), labels)
    
    fit_set, validation_set = raeg.training.split_validation(variant_set, seed = config.seed)
    
    torch.manual_seed(config.seed)
    
    classifier = raeg.targets.build_classifier(architecture, num_classes, target_config.width)
    
    raeg.training.train_classifier(
        classifier, fit_set, validation_set, target_config, name = "pirate_" + variant.replace("+", "_"))
        
    accuracy = raeg.training.evaluate_classifier(classifier, raeg.datasets.TensorSplit(test_images, test_labels))
    
    print("Pirate " + architecture + " trained on " + variant + " images: clean test accuracy = " + "%.4f" % accuracy)
    
    return accuracy


def pirate_table(generator, train_set, test_set, architecture = None, config = None, target_config = None):
    """ Run `retrain_pirate` for every variant, as an `EvalReport` with columns "A_<variant>". """
    config = config or EvalConfig()
    
    report = EvalReport(metadata = {
        "protocol": "retrain_pirate",
        "architecture": architecture or config.pirate_architecture,
        "defense": config.pirate_defense})
        
    for variant in PIRATE_VARIANTS:
    
        report.columns["A_" + variant] = retrain_pirate(
            generator, train_set, test_set, variant, architecture, config, target_config)
            
    return report


def defended_accuracy(robustness_report):
    """ Mean ensemble accuracy over every battery attack except identity. """
    values = [
        value for name, value in robustness_report.columns.items()
        if name.startswith("A_") and not name.endswith("_held_out") and name not in ("A_ori", "A_identity")]
        
    return sum(values)/len(values) if values else math.nan


def ablation_weights(cfg, toggles):
    
    weights = raeg.losses.LossWeights.from_config(cfg)
    
    for toggle in toggles:
    
        if toggle not in ABLATION_TOGGLES:
        
            raise raeg.errors.ConfigError(
                "Unknown ablation toggle '" + str(toggle) + "', expected one of " + ", ".join(ABLATION_TOGGLES))
                
    if "no_discriminator" in toggles:
    
        weights.delta = 0.
        
    if "no_perceptual" in toggles:
    
        weights.alpha = 0.
        
    return weights


def single_target_ensemble(ensemble):
    """ An ensemble of only the first member of `ensemble`, sharing its frozen parameters. """
    name = ensemble.names[0]
    
    single = raeg.targets.ClassifierEnsemble({name: ensemble.members[name]}, ensemble.num_classes)
    
    single.clean_accuracies = {name: ensemble.clean_accuracies.get(name, 0.)}
    
    return single.freeze()


def ablation_suite(cfg, train_set, test_set, ensemble, settings = None, output_dir = None):
    """ Retrain the generator once per toggle set and compare P_prt, P_rev, A_prt and A_def.
    
    Accuracies are always measured on the full `ensemble`. The default settings are the full
    system followed by each toggle alone.
    """
    if settings is None:
    
        settings = [()] + [(toggle,) for toggle in ABLATION_TOGGLES]
        
    config = EvalConfig.from_config(cfg)
    
    report = EvalReport(metadata = {"protocol": "ablation_suite"})
    
    for toggles in settings:
    
        name = "+".join(toggles) if toggles else "full"
        
        training_ensemble = single_target_ensemble(ensemble) if "single_target" in toggles else ensemble
        
        run_dir = None if output_dir is None else pathlib.Path(output_dir)/name
        
        print("Ablation setting '" + name + "'")
        
        trainer = raeg.training.train_raeg(
            cfg, train_set, training_ensemble, output_dir = run_dir, weights = ablation_weights(cfg, toggles))
            
        quality = evaluate(trainer.generator, ensemble, test_set, config)
        
        robustness = evaluate_robustness(trainer.generator, ensemble, test_set, config)
        
        report.warnings += robustness.warnings
        
        report.accuracies[name] = {
            "P_prt": quality.columns["P_prt"],
            "P_rev": quality.columns["P_rev"],
            "A_prt": quality.columns["A_prt"],
            "A_def": defended_accuracy(robustness)}
            
    return report


def tradeoff_sweep(cfg, train_set, test_set, ensemble, gammas = None, output_dir = None):
    """ Retrain the generator at each classification weight gamma and report the `evaluate` columns. """
    config = EvalConfig.from_config(cfg)
    
    gammas = config.sweep_gammas if gammas is None else gammas
    
    report = EvalReport(metadata = {"protocol": "tradeoff_sweep", "gammas": list(gammas)})
    
    for gamma in gammas:
    
        weights = dataclasses.replace(raeg.losses.LossWeights.from_config(cfg), gamma = gamma)
        
        name = "gamma_" + repr(float(gamma))
        
        run_dir = None if output_dir is None else pathlib.Path(output_dir)/name
        
        print("Sweep setting gamma = " + repr(gamma))
        
        trainer = raeg.training.train_raeg(cfg, train_set, ensemble, output_dir = run_dir, weights = weights)
        
        report.accuracies[name] = evaluate(trainer.generator, ensemble, test_set, config).columns
        
    return report


def _format_value(value):
    
    if isinstance(value, float):
    
        if math.isinf(value):
        
            return "inf"
            
        return "%.4f" % value
        
    return str(value)


def format_table(rows, columns, title = None):
    """ Format a list of dicts as a fixed-width text table, with one column per key in `columns`. """
    header = [""] + list(columns)
    
    lines = [[str(row.get("", ""))] + [_format_value(row.get(c, "")) for c in columns] for row in rows]
    
    widths = [max(len(line[i]) for line in [header] + lines) for i in range(len(header))]
    
    def render(cells):
    
        return "  ".join(cell.rjust(width) for cell, width in zip(cells, widths))
        
    output = [] if title is None else [title]
    
    output += [render(header), "  ".join("-"*width for width in widths)] + [render(line) for line in lines]
    
    return "\n".join(output)


def format_report(report):
    """ Format a report as its columns followed by its per-condition accuracies. """
    title = report.metadata.get("protocol", "report")
    
    text = []
    
    if report.columns:
    
        columns = list(report.columns)
        
        text.append(format_table([dict(report.columns, **{"": title})], columns, title = title))
        
    if report.accuracies:
    
        names = []
        
        for accuracies in report.accuracies.values():
        
            names += [n for n in accuracies if n not in names]
            
        rows = [dict(accuracies, **{"": condition}) for condition, accuracies in report.accuracies.items()]
        
        text.append(format_table(rows, names))
        
    for warning in report.warnings:
    
        text.append("Warning: " + warning)
        
    return "\n\n".join(text)
