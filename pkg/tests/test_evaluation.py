""" **test_evaluation.py** tests the metrics, the real-attack battery and the evaluation protocols. """
import raeg
import math
import pathlib
import shlex
import sys
import tempfile
import numpy
import pytest
import skimage.metrics
import torch


def toy_images(count = 4, image_size = 32, seed = 0):
    
    rng = numpy.random.default_rng(seed)
    
    images = []
    
    for i in range(count):
    
        image = raeg.datasets.draw_toy_image(rng, raeg.datasets.TOY_SHAPES[i % 2], "warm", image_size)
        
        images.append(torch.from_numpy(numpy.asarray(image, dtype = numpy.float32)/255.).permute(2, 0, 1))
    
    return torch.stack(images)


def identity_generator():
    
    torch.manual_seed(0)
    
    config = raeg.generator.GeneratorConfig(scales = 2, blocks_per_scale = 1, subnet_width = 8, residual_blocks = 1)
    
    return raeg.generator.InvertibleGenerator(config).eval()


def tiny_ensemble(held_out = False):
    
    torch.manual_seed(0)
    
    members = {name: raeg.targets.build_classifier(name, 2, width = 8) for name in ("plain", "residual")}
    
    extra = {"held_out_dense": raeg.targets.build_classifier("dense", 2, width = 8)} if held_out else None
    
    return raeg.targets.ClassifierEnsemble(members, 2, held_out = extra).freeze()


def tiny_testset():
    
    return raeg.datasets.TensorSplit(toy_images(count = 6, image_size = 16), torch.tensor([0, 1, 0, 1, 0, 1]))


def copy_command():
    
    code = "import shutil, sys; shutil.copytree(sys.argv[1], sys.argv[2], dirs_exist_ok = True)"
    
    return shlex.quote(sys.executable) + " -c " + shlex.quote(code)
    

def test__psnr__examples__ci__():
    
    a = torch.zeros(1, 3, 8, 8)
    
    assert(abs(raeg.evaluation.psnr(a, a + 0.1) - 20.) < 1.e-5)
    
    assert(raeg.evaluation.psnr(a, a) == math.inf)
    
    assert(raeg.evaluation.psnr(a, torch.ones_like(a)) == 0.)
    
    values = raeg.evaluation.psnr_per_image(torch.cat((a, a)), torch.cat((a, a + 0.1)))
    
    assert(values[0] == math.inf)
    
    assert(abs(values[1] - 20.) < 1.e-5)
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.evaluation.psnr(a, a[..., :4])


def test__ssim__identical_and_symmetric__ci__():
    
    a, b = toy_images(count = 2)
    
    assert(abs(raeg.evaluation.ssim(a, a) - 1.) < 1.e-12)
    
    assert(raeg.evaluation.ssim(a, b) < 1.)
    
    assert(abs(raeg.evaluation.ssim(a, b) - raeg.evaluation.ssim(b, a)) < 1.e-12)


def test__ssim__constant_images__ci__():
    
    a = torch.full((1, 3, 16, 16), 0.2)
    
    b = torch.full((1, 3, 16, 16), 0.6)
    
    c1 = 0.01**2
    
    expected = (2.*0.2*0.6 + c1)/(0.2**2 + 0.6**2 + c1)
    
    assert(abs(raeg.evaluation.ssim(a.double(), b.double()) - expected) < 1.e-6)


def test__ssim__matches_scikit_image__ci__():
    
    a, b = toy_images(count = 2, seed = 3)
    
    b = (0.7*a + 0.3*b).clamp(0., 1.)
    
    expected = skimage.metrics.structural_similarity(
        a.double().numpy(), 
        b.double().numpy(), 
        channel_axis = 0, 
        gaussian_weights = True, 
        sigma = 1.5, 
        use_sample_covariance = False, 
        data_range = 1.)
    
    assert(abs(raeg.evaluation.ssim(a, b) - expected) < 1.e-4)


def test__ssim__too_small__ci__():
    
    with pytest.raises(raeg.errors.ShapeError):
    
        raeg.evaluation.ssim(torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8))


def test__metric_stats__ci__():
    
    stats = raeg.evaluation.metric_stats([1., 3., math.inf])
    
    assert(stats == {"mean": 2., "std": 1., "count": 3, "infinite": 1})
    
    assert(raeg.evaluation.metric_stats([math.inf, math.inf])["mean"] == math.inf)


def test__eval_config__ci__():
    
    config = raeg.evaluation.EvalConfig.from_config(raeg.config.default_config())
    
    assert(config.jpeg_qualities == (90, 50))
    
    assert(raeg.evaluation.battery_names(config) == ["identity", "jpeg90", "jpeg50", "resize", "noise", "median"])
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.evaluation.EvalConfig(jpeg_qualities = (0,))
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.evaluation.EvalConfig(resize_factor = 1.5)


def test__battery__ci__():
    
    x = raeg.generator.quantize(toy_images())
    
    config = raeg.evaluation.EvalConfig()
    
    warnings = []
    
    battery = raeg.evaluation.real_attack_battery(x, config, warnings = warnings)
    
    assert(warnings == [])
    
    assert(list(battery) == raeg.evaluation.battery_names(config))
    
    assert(battery["identity"] is x)
    
    for name, attacked in battery.items():
    
        assert(attacked.shape == x.shape)
        
        assert(torch.equal(raeg.generator.quantize(attacked), attacked))


def test__real_jpeg__quality_ordering__ci__():
    
    x = toy_images(image_size = 64)
    
    assert(raeg.evaluation.psnr(x, raeg.evaluation.real_jpeg(x, 90)) 
        > raeg.evaluation.psnr(x, raeg.evaluation.real_jpeg(x, 50)))


def test__real_median__ci__():
    
    constant = torch.full((1, 3, 16, 16), 100./255.)
    
    assert(torch.equal(raeg.evaluation.real_median(constant, 3), constant))
    
    spike = constant.clone()
    
    spike[0, :, 8, 8] = 1.
    
    assert(torch.equal(raeg.evaluation.real_median(spike, 3), constant))


def test__real_noise__ci__():
    
    x = raeg.generator.quantize(toy_images())
    
    generator = torch.Generator()
    
    generator.manual_seed(0)
    
    assert(torch.equal(raeg.evaluation.real_noise(x, 0., generator), x))
    
    a = raeg.evaluation.real_noise(x, 0.02, torch.Generator().manual_seed(1))
    
    b = raeg.evaluation.real_noise(x, 0.02, torch.Generator().manual_seed(1))
    
    assert(torch.equal(a, b))
    
    assert(not torch.equal(a, x))


def test__external_defense__ci__():
    
    x = raeg.generator.quantize(toy_images(count = 2))
    
    defense = raeg.evaluation.ExternalDefense("copy", copy_command(), timeout = 60.)
    
    assert(torch.equal(defense(x), x))
    
    failing = raeg.evaluation.ExternalDefense("failing", shlex.quote(sys.executable) + " -c 'import sys; sys.exit(1)'")
    
    with pytest.raises(raeg.errors.DefenseUnavailableError):
    
        failing(x)


def test__battery__skips_unavailable_defense__ci__():
    
    x = raeg.generator.quantize(toy_images(count = 2))
    
    config = raeg.evaluation.EvalConfig(external_defenses = {
        "copy": copy_command(),
        "missing": "/nonexistent/defense-command"})
    
    warnings = []
    
    battery = raeg.evaluation.real_attack_battery(x, config, warnings = warnings)
    
    assert(torch.equal(battery["copy"], x))
    
    assert("missing" not in battery)
    
    assert(len(warnings) == 1)
    
    assert("missing" in warnings[0])


def test__eval_report__json__ci__():
    
    report = raeg.evaluation.EvalReport(
        columns = {"A_ori": 0.9, "P_prt": math.inf},
        accuracies = {"clean": {"plain": 0.9, "mean": 0.9}},
        stats = {"P_prt": raeg.evaluation.metric_stats([math.inf])},
        warnings = ["Skipped attack 'x'"],
        metadata = {"seed": 0})
    
    path = pathlib.Path(tempfile.mkdtemp())/"report.json"
    
    report.write_json(path)
    
    assert(raeg.evaluation.EvalReport.read_json(path) == report)
    
    assert(report.to_json() == raeg.evaluation.EvalReport.read_json(path).to_json())
    
    report.write_csv(path.with_suffix(".csv"))
    
    rows = path.with_suffix(".csv").read_text().splitlines()
    
    assert(rows[0] == "section,key,name,value")
    
    assert("columns,,P_prt,inf" in rows)
    
    assert("inf" in raeg.evaluation.format_report(report))


def test__evaluate__identity_generator__ci__():
    
    generator = identity_generator()
    
    testset = raeg.datasets.TensorSplit(raeg.generator.quantize(tiny_testset().images), tiny_testset().labels)
    
    report = raeg.evaluation.evaluate(generator, tiny_ensemble(), testset, metadata = {"seed": 0})
    
    assert(report.columns["A_prt"] == report.columns["A_ori"])
    
    assert(report.columns["P_prt"] == math.inf)
    
    assert(report.stats["P_prt"]["infinite"] == 6)
    
    assert(abs(report.columns["S_prt"] - 1.) < 1.e-12)
    
    assert(report.columns["P_rev"] > 60.)
    
    assert(report.metadata["protocol"] == "evaluate")
    
    assert(set(report.accuracies) == {"clean", "protected", "recovered"})


def test__evaluate_robustness__ci__():
    
    generator = identity_generator()
    
    testset = raeg.datasets.TensorSplit(raeg.generator.quantize(tiny_testset().images), tiny_testset().labels)
    
    report = raeg.evaluation.evaluate_robustness(generator, tiny_ensemble(held_out = True), testset)
    
    config = raeg.evaluation.EvalConfig()
    
    for name in raeg.evaluation.battery_names(config):
    
        assert("A_" + name in report.columns)
        
        assert("A_" + name + "_held_out" in report.columns)
    
    assert(report.columns["A_identity"] == report.columns["A_ori"])
    
    assert("held_out_dense" in report.accuracies["jpeg50"])
    
    expected = sum(report.columns["A_" + name] for name in ("jpeg90", "jpeg50", "resize", "noise", "median"))/5.
    
    assert(abs(raeg.evaluation.defended_accuracy(report) - expected) < 1.e-12)


def test__evaluate_inversion_under_attack__ci__():
    
    report = raeg.evaluation.evaluate_inversion_under_attack(identity_generator(), tiny_testset())
    
    assert(report.columns["P_rev_identity"] > 40.)
    
    assert(report.columns["P_rev_jpeg50"] < report.columns["P_rev_identity"])
    
    assert("S_rev_median" in report.stats)


def test__pirate_training_images__ci__():
    
    generator = identity_generator()
    
    images = raeg.generator.quantize(tiny_testset().images)
    
    config = raeg.evaluation.EvalConfig()
    
    assert(torch.equal(raeg.evaluation.pirate_training_images(generator, images, "protected", config), images))
    
    defended = raeg.evaluation.pirate_training_images(generator, images, "protected+defense", config)
    
    assert(torch.equal(defended, raeg.evaluation.real_jpeg(images, 50)))
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.evaluation.pirate_training_images(generator, images, "clean", config)


def test__ablation_weights__ci__():
    
    cfg = raeg.config.default_config()
    
    weights = raeg.evaluation.ablation_weights(cfg, ("no_discriminator", "no_perceptual"))
    
    assert((weights.delta, weights.alpha, weights.gamma) == (0., 0., 0.005))
    
    assert(raeg.evaluation.ablation_weights(cfg, ()) == raeg.losses.LossWeights())
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.evaluation.ablation_weights(cfg, ("no_generator",))
    
    single = raeg.evaluation.single_target_ensemble(tiny_ensemble())
    
    assert(single.names == ["plain"])
    
    assert(single.frozen)


def test__format_table__ci__():
    
    text = raeg.evaluation.format_table([{"": "full", "P_prt": 31.25, "A_prt": math.inf}], ["P_prt", "A_prt"])
    
    lines = text.splitlines()
    
    assert(lines[0].split() == ["P_prt", "A_prt"])
    
    assert(lines[2].split() == ["full", "31.2500", "inf"])


def test__psnr__matches_scikit_image__ci__():
    
    a, b = toy_images(count = 2, seed = 5)
    
    expected = skimage.metrics.peak_signal_noise_ratio(a.double().numpy(), b.double().numpy(), data_range = 1.)
    
    assert(abs(raeg.evaluation.psnr(a, b) - expected) < 1.e-4)


def test__evaluate__deterministic_report__ci__():
    
    generator = identity_generator()
    
    with torch.no_grad():
    
        for name, parameter in generator.named_parameters():
        
            if name.endswith("gain"):
            
                parameter.fill_(0.2)
    
    reports = [
        raeg.evaluation.evaluate_robustness(generator, tiny_ensemble(), tiny_testset(), metadata = {"seed": 0}).to_json()
        for i in range(2)]
    
    assert(reports[0] == reports[1])


def tiny_config():
    
    cfg = raeg.config.default_config()
    
    cfg["model"].update({"scales": 2, "blocks_per_scale": 1, "subnet_width": 8, "residual_blocks": 1,
        "discriminator_width": 4})
    
    cfg["data"].update({"image_size": 16, "batch_size": 4})
    
    cfg["training"].update({"epochs": 1, "device": "cpu", "max_steps_per_epoch": 2})
    
    cfg["logging"].update({"log_every": 1, "verbose": False, "plot": False})
    
    cfg["eval"].update({"sweep_gammas": [0.001, 0.02]})
    
    return cfg


def tiny_trainset():
    
    return raeg.datasets.TensorSplit(toy_images(count = 12, image_size = 16, seed = 1), torch.arange(12) % 2)


def test__retrain_pirate__ci__():
    
    generator = identity_generator()
    
    config = raeg.evaluation.EvalConfig(pirate_epochs = 1, pirate_architecture = "plain")
    
    target_config = raeg.training.TargetTrainConfig(width = 8, batch_size = 4, device = "cpu", verbose = False)
    
    accuracy = raeg.evaluation.retrain_pirate(
        generator, tiny_trainset(), tiny_testset(), "protected", config = config, target_config = target_config)
    
    assert(0. <= accuracy <= 1.)
    
    again = raeg.evaluation.retrain_pirate(
        generator, tiny_trainset(), tiny_testset(), "protected", config = config, target_config = target_config)
    
    assert(again == accuracy)
    
    report = raeg.evaluation.pirate_table(
        generator, tiny_trainset(), tiny_testset(), config = config, target_config = target_config)
    
    assert(set(report.columns) == {"A_protected", "A_protected+defense", "A_recovered"})
    
    assert(report.columns["A_protected"] == accuracy)
    
    assert(report.metadata["architecture"] == "plain")
    
    assert(report.metadata["defense"] == "jpeg50")


def test__ablation_suite__ci__():
    
    output_dir = pathlib.Path(tempfile.mkdtemp())
    
    settings = [(), ("no_discriminator",), ("no_perceptual", "single_target")]
    
    report = raeg.evaluation.ablation_suite(
        tiny_config(), tiny_trainset(), tiny_testset(), tiny_ensemble(), settings = settings, output_dir = output_dir)
    
    assert(list(report.accuracies) == ["full", "no_discriminator", "no_perceptual+single_target"])
    
    for name, row in report.accuracies.items():
    
        assert(set(row) == {"P_prt", "P_rev", "A_prt", "A_def"})
        
        assert(0. <= row["A_prt"] <= 1.)
        
        assert(0. <= row["A_def"] <= 1.)
        
        assert((output_dir/name/"generator.raeg").is_file())
    
    with pytest.raises(raeg.errors.ConfigError):
    
        raeg.evaluation.ablation_suite(
            tiny_config(), tiny_trainset(), tiny_testset(), tiny_ensemble(), settings = [("no_generator",)])


def test__tradeoff_sweep__ci__():
    
    report = raeg.evaluation.tradeoff_sweep(tiny_config(), tiny_trainset(), tiny_testset(), tiny_ensemble())
    
    assert(report.metadata["gammas"] == [0.001, 0.02])
    
    assert(list(report.accuracies) == ["gamma_0.001", "gamma_0.02"])
    
    for row in report.accuracies.values():
    
        assert({"A_ori", "A_prt", "A_rev", "P_prt", "P_rev", "S_prt", "S_rev"} <= set(row))
    
    clean = [row["A_ori"] for row in report.accuracies.values()]
    
    assert(clean[0] == clean[1])
