""" **cli.py** implements the `raeg` command line interface.

Every command reads the JSON config given with --config (merged onto the defaults), and
`--seed`, `--epochs` and `--device` override the corresponding config values.
Expected failures exit with status 2 after printing "error: <ErrorClass>: <message>".
"""
import raeg
import argparse
import pathlib
import sys


ENSEMBLE_FILENAME = "ensemble.raeg"

GENERATOR_FILENAME = "generator.raeg"


def _output_dir(args):
    
    if args.out is None:
    
        raise raeg.errors.ConfigError("This command needs an output directory (--out)")
        
    return raeg.helpers.mkdir_p(args.out)


def _config(args):
    
    cfg = raeg.config.load_config(args.config)
    
    if getattr(args, "seed", None) is not None:
    
        cfg["training"]["seed"] = args.seed
        
    if getattr(args, "epochs", None) is not None:
    
        cfg["training"]["epochs"] = args.epochs
        
    if getattr(args, "device", None) is not None:
    
        cfg["training"]["device"] = args.device
        
    return cfg


def _layout(args, cfg):
    
    if args.data is None:
    
        raise raeg.errors.ConfigError("This command needs a dataset root (--data)")
        
    return raeg.datasets.DatasetLayout(
        args.data, seed = cfg["training"]["seed"], train_ratio = cfg["data"]["train_ratio"])


def _check_image_size(cfg):
    
    config = raeg.generator.GeneratorConfig.from_config(cfg)
    
    size = cfg["data"]["image_size"]
    
    if (size % config.size_multiple != 0) or (size < 16):
    
        raise raeg.errors.ConfigError(
            "data.image_size must be a multiple of " + str(config.size_multiple) + " and at least 16, got "
            + str(size), keys = ("data.image_size",))
            
    return size


def _splits(args, cfg):
    
    layout = _layout(args, cfg)
    
    size = _check_image_size(cfg)
    
    return layout, raeg.datasets.ImageSplit(layout, "train", size), raeg.datasets.ImageSplit(layout, "test", size)


def _check_labels(layout, directory):
    """ Require the class mapping recorded next to the targets to match the dataset. """
    path = pathlib.Path(directory)/raeg.datasets.LABELS_FILENAME
    
    if path.is_file() and (raeg.datasets.read_labels(path) != layout.class_to_index):
    
        raise raeg.errors.DatasetError("Class labels differ from those the targets were trained with", paths = (path,))


def _targets_path(args):
    
    if args.targets is not None:
    
        return pathlib.Path(args.targets)
        
    if args.out is not None:
    
        return pathlib.Path(args.out)/ENSEMBLE_FILENAME
        
    raise raeg.errors.ConfigError("This command needs a target ensemble checkpoint (--targets)")


def _ensemble(args, cfg):
    
    ensemble = raeg.targets.ClassifierEnsemble.read_checkpoint(_targets_path(args))
    
    return ensemble.to(raeg.helpers.select_device(cfg["training"]["device"]))


def _generator(args, cfg):
    
    if args.ckpt is None:
    
        raise raeg.errors.ConfigError("This command needs a generator checkpoint (--ckpt)")
        
    generator = raeg.generator.InvertibleGenerator.read_checkpoint(args.ckpt)
    
    return generator.to(raeg.helpers.select_device(cfg["training"]["device"])).eval()


def make_toy_data(args):
    
    cfg = _config(args)
    
    raeg.datasets.write_toy_dataset(
        _output_dir(args),
        num_classes = args.classes,
        images_per_class = args.per_class,
        image_size = args.image_size or cfg["data"]["image_size"],
        seed = cfg["training"]["seed"])


def train_targets(args):
    
    cfg = _config(args)
    
    if args.epochs is not None:
    
        cfg["targets"]["max_epochs"] = args.epochs
        
    output_dir = _output_dir(args)
    
    layout, train_set, test_set = _splits(args, cfg)
    
    layout.write_labels(output_dir/raeg.datasets.LABELS_FILENAME)
    
    ensemble = raeg.training.pretrain_targets(
        train_set, test_set, layout.num_classes, raeg.training.TargetTrainConfig.from_config(cfg), output_dir)
        
    ensemble.write_checkpoint(output_dir/ENSEMBLE_FILENAME, metadata = {"dataset": layout.root})
    
    for name, accuracy in sorted(ensemble.clean_accuracies.items()):
    
        print(name + ": " + "%.4f" % accuracy)


def train(args):
    
    cfg = _config(args)
    
    output_dir = _output_dir(args)
    
    layout, train_set, _ = _splits(args, cfg)
    
    _check_labels(layout, _targets_path(args).parent)
    
    layout.write_labels(output_dir/raeg.datasets.LABELS_FILENAME)
    
    raeg.config.write_config(cfg, output_dir/"config.json")
    
    raeg.training.train_raeg(cfg, train_set, _ensemble(args, cfg), output_dir = output_dir)


def protect(args):
    
    cfg = _config(args)
    
    generator = _generator(args, cfg)
    
    paths, images = raeg.datasets.read_image_folder(args.input)
    
    batch_size = cfg["eval"]["batch_size"]
    
    protected = raeg.evaluation.protect_images(generator, images, batch_size)
    
    for path, image in zip(paths, protected):
    
        raeg.datasets.write_image(image, pathlib.Path(args.output)/path.with_suffix(".png"))
        
    recovered = raeg.generator.quantize(raeg.evaluation.recover_images(generator, protected, batch_size))
    
    bound = float((recovered - images).abs().max())
    
    print("Protected " + str(len(paths)) + " images; PSNR to the originals = "
        + "%.4f" % raeg.evaluation.psnr(images, protected) + " dB")
        
    print("Quantization bound on the recovery error: max |I - recovered| = " + repr(bound))


def recover(args):
    
    cfg = _config(args)
    
    generator = _generator(args, cfg)
    
    paths, protected = raeg.datasets.read_image_folder(args.input)
    
    recovered = raeg.evaluation.recover_images(generator, protected, cfg["eval"]["batch_size"])
    
    for path, image in zip(paths, recovered):
    
        raeg.datasets.write_image(image, pathlib.Path(args.output)/path.with_suffix(".png"))
        
    print("Recovered " + str(len(paths)) + " images to " + str(args.output))


def attack(args):
    
    cfg = _config(args)
    
    config = raeg.evaluation.EvalConfig.from_config(cfg)
    
    paths, images = raeg.datasets.read_image_folder(args.input)
    
    warnings = []
    
    battery = raeg.evaluation.real_attack_battery(images, config, warnings = warnings)
    
    kinds = list(battery) if args.kind == "all" else [args.kind]
    
    for kind in kinds:
    
        if kind not in battery:
        
            raise raeg.errors.ConfigError(
                "Unknown or unavailable attack '" + kind + "', expected one of " + ", ".join(battery))
                
        for path, image in zip(paths, battery[kind]):
        
            raeg.datasets.write_image(image, pathlib.Path(args.output)/kind/path.with_suffix(".png"))
            
    print("Wrote " + ", ".join(kinds) + " attacks of " + str(len(paths)) + " images to " + str(args.output))


def _write_report(report, output_dir, name):
    
    report.write_json(pathlib.Path(output_dir)/(name + ".json"))
    
    report.write_csv(pathlib.Path(output_dir)/(name + ".csv"))
    
    print(raeg.evaluation.format_report(report))


def evaluate(args):
    
    cfg = _config(args)
    
    output_dir = _output_dir(args)
    
    layout, _, test_set = _splits(args, cfg)
    
    _check_labels(layout, _targets_path(args).parent)
    
    generator = _generator(args, cfg)
    
    ensemble = _ensemble(args, cfg)
    
    config = raeg.evaluation.EvalConfig.from_config(cfg)
    
    metadata = {"checkpoint": str(args.ckpt), "dataset": layout.root, "seed": cfg["training"]["seed"]}
    
    _write_report(raeg.evaluation.evaluate(generator, ensemble, test_set, config, metadata), output_dir, "report")
    
    _write_report(
        raeg.evaluation.evaluate_robustness(generator, ensemble, test_set, config, metadata), output_dir, "robustness")
        
    _write_report(
        raeg.evaluation.evaluate_inversion_under_attack(generator, test_set, config, metadata), output_dir, "inversion")
        
    if cfg["logging"]["plot"]:
    
        images, _ = raeg.evaluation.dataset_tensors(test_set)
        
        images = images[:8]
        
        protected = raeg.evaluation.protect_images(generator, images)
        
        recovered = raeg.evaluation.recover_images(generator, protected)
        
        raeg.plotting.save_image_grid(
            [images, protected, raeg.plotting.amplified_difference(images, protected), recovered],
            output_dir/"examples.png",
            row_labels = ["original", "protected", "difference", "recovered"])


def retrain_pirate(args):
    
    cfg = _config(args)
    
    output_dir = _output_dir(args)
    
    layout, train_set, test_set = _splits(args, cfg)
    
    report = raeg.evaluation.pirate_table(
        _generator(args, cfg),
        train_set,
        test_set,
        architecture = args.architecture,
        config = raeg.evaluation.EvalConfig.from_config(cfg),
        target_config = raeg.training.TargetTrainConfig.from_config(cfg))
        
    _write_report(report, output_dir, "pirate")


def ablate(args):
    
    cfg = _config(args)
    
    output_dir = _output_dir(args)
    
    layout, train_set, test_set = _splits(args, cfg)
    
    _check_labels(layout, _targets_path(args).parent)
    
    settings = None
    
    if args.toggles is not None:
    
        settings = [tuple(t for t in toggles.split("+") if t) for toggles in args.toggles]
        
    report = raeg.evaluation.ablation_suite(
        cfg, train_set, test_set, _ensemble(args, cfg), settings = settings, output_dir = output_dir)
        
    _write_report(report, output_dir, "ablation")


def sweep(args):
    
    cfg = _config(args)
    
    output_dir = _output_dir(args)
    
    layout, train_set, test_set = _splits(args, cfg)
    
    _check_labels(layout, _targets_path(args).parent)
    
    report = raeg.evaluation.tradeoff_sweep(
        cfg, train_set, test_set, _ensemble(args, cfg), gammas = args.gammas, output_dir = output_dir)
        
    _write_report(report, output_dir, "sweep")


COMMANDS = {
    "make-toy-data": make_toy_data,
    "train-targets": train_targets,
    "train": train,
    "protect": protect,
    "recover": recover,
    "attack": attack,
    "eval": evaluate,
    "retrain-pirate": retrain_pirate,
    "ablate": ablate,
    "sweep": sweep}


def build_parser():
    
    parser = argparse.ArgumentParser(
        prog = "raeg", description = "Reversible adversarial example generation")
        
    commands = parser.add_subparsers(dest = "command", required = True)
    
    parsers = {}
    
    for name in COMMANDS:
    
        command = commands.add_parser(name)
        
        command.add_argument("--config", default = None, help = "JSON config file")
        
        command.add_argument("--data", default = None, help = "class-folder dataset root")
        
        command.add_argument("--out", default = None, help = "output directory")
        
        command.add_argument("--ckpt", default = None, help = "generator checkpoint")
        
        command.add_argument("--targets", default = None, help = "target ensemble checkpoint")
        
        command.add_argument("--seed", type = int, default = None)
        
        command.add_argument("--epochs", type = int, default = None)
        
        command.add_argument("--device", default = None)
        
        parsers[name] = command
        
    parsers["make-toy-data"].add_argument("--classes", type = int, default = 10)
    
    parsers["make-toy-data"].add_argument("--per-class", type = int, default = 500)
    
    parsers["make-toy-data"].add_argument("--image-size", type = int, default = None)
    
    for name in ("protect", "recover", "attack"):
    
        parsers[name].add_argument("--input", required = True, help = "input image directory")
        
        parsers[name].add_argument("--output", required = True, help = "output image directory")
        
    parsers["attack"].add_argument("--kind", default = "all", help = "battery attack name, or 'all'")
    
    parsers["retrain-pirate"].add_argument("--architecture", default = None)
    
    parsers["ablate"].add_argument(
        "--toggles", nargs = "*", default = None,
        help = "toggle sets such as 'no_discriminator' or 'no_perceptual+single_target'; an empty string is the full system")
        
    parsers["sweep"].add_argument("--gammas", type = float, nargs = "+", default = None)
    
    return parser


def main(argv = None):
    """ Run the command line interface, returning the exit status. """
    args = build_parser().parse_args(argv)
    
    try:
    
        COMMANDS[args.command](args)
        
    except raeg.errors.RAEGError as error:
    
        print("error: " + type(error).__name__ + ": " + str(error), file = sys.stderr)
        
        return 2
        
    return 0
