""" **config.py** defines the configuration schema, its defaults, and the JSON config file loader.

A configuration is a nested dictionary with the sections below. 
Each module builds its typed view of the relevant section with a `from_config` class method,
e.g. `raeg.generator.GeneratorConfig.from_config(cfg)`.
"""
import raeg
import copy
import json


DEFAULT_CONFIG = {
    "model": {
        "scales": 3,
        "blocks_per_scale": 4,
        "subnet_width": 32,
        "residual_blocks": 2,
        "clamp": 2.,
        "discriminator_width": 32},
    "losses": {
        "alpha": 0.01,
        "beta": 1.,
        "gamma": 0.005,
        "delta": 0.01,
        "epsilon": 2.},
    "attacks": {
        "kinds": ["identity", "gaussian_noise", "gaussian_blur", "rescale", "random_crop", "jpeg_sim"],
        "noise_sigma": [0., 0.05],
        "blur_kernel": [3, 5],
        "blur_sigma": [0.5, 1.5],
        "rescale_factor": [0.5, 1.],
        "crop_ratio": [0.8, 1.],
        "jpeg_quality": [10, 100],
        "jpeg_methods": ["mask", "soft"],
        "jpeg_weights": None,
        "per_sample": False},
    "optimizer": {
        "lr": 1.e-4,
        "beta1": 0.9,
        "beta2": 0.999,
        "discriminator_lr": 1.e-4},
    "data": {
        "image_size": 64,
        "batch_size": 8,
        "train_ratio": 0.9,
        "num_workers": 0},
    "targets": {
        "architectures": ["plain", "residual", "dense"],
        "held_out": None,
        "width": 32,
        "batch_size": 32,
        "lr": 1.e-3,
        "max_epochs": 30,
        "patience": 3},
    "training": {
        "epochs": 20,
        "seed": 0,
        "device": "auto",
        "checkpoint_every": 1,
        "max_steps_per_epoch": None},
    "logging": {
        "log_every": 10,
        "verbose": True,
        "plot": True,
        "grad_norms": False},
    "eval": {
        "jpeg_qualities": [90, 50],
        "resize_factor": 0.5,
        "noise_sigma": 0.02,
        "median_size": 3,
        "batch_size": 32,
        "external_defenses": {},
        "pirate_architecture": "residual",
        "pirate_epochs": 10,
        "pirate_defense": "jpeg50",
        "sweep_gammas": [0.001, 0.005, 0.02]}}


def default_config():
    """ Return a deep copy of `DEFAULT_CONFIG`. """
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(base, overrides):
    """ Return a copy of `base` with the sections of `overrides` merged key by key. """
    merged = copy.deepcopy(base)
    
    for section, values in overrides.items():
    
        if isinstance(values, dict) and isinstance(merged.get(section), dict):
        
            merged[section].update(copy.deepcopy(values))
            
        else:
        
            merged[section] = copy.deepcopy(values)
    
    return merged


def validate_config(cfg, require_all = False):
    """ Check `cfg` against the schema of `DEFAULT_CONFIG`.
    
    Unknown sections and keys are always errors. 
    With `require_all`, every key of the schema must be present.
    All problems are reported together in one `raeg.errors.ConfigError`,
    whose `keys` attribute lists the dotted key names.
    """
    unknown = []
    
    missing = []
    
    for section, values in cfg.items():
    
        if section not in DEFAULT_CONFIG:
        
            unknown.append(section)
            
            continue
            
        if not isinstance(values, dict):
        
            raise raeg.errors.ConfigError("Config section '" + section + "' must be an object", keys = (section,))
        
        for key in values:
        
            if key not in DEFAULT_CONFIG[section]:
            
                unknown.append(section + "." + key)
    
    if require_all:
    
        for section, values in DEFAULT_CONFIG.items():
        
            for key in values:
            
                if key not in cfg.get(section, {}):
                
                    missing.append(section + "." + key)
    
    if missing or unknown:
    
        message = []
        
        if missing:
        
            message.append("missing config keys: " + ", ".join(missing))
            
        if unknown:
        
            message.append("unknown config keys: " + ", ".join(unknown))
        
        raise raeg.errors.ConfigError("; ".join(message), keys = missing + unknown)
    
    return cfg


def load_config(path = None, require_all = False):
    """ Load a JSON config file and merge it onto the defaults.
    
    Parameters
    ----------
    path : string or None
    
        Without a path, the defaults are returned.
        
    require_all : bool
    
        Require the file itself to define every key of the schema.
    """
    if path is None:
    
        return default_config()
    
    try:
    
        with open(str(path)) as config_file:
        
            overrides = json.load(config_file)
            
    except OSError as error:
    
        raise raeg.errors.ConfigError("Cannot read config file " + str(path) + ": " + str(error))
        
    except ValueError as error:
    
        raise raeg.errors.ConfigError("Config file " + str(path) + " is not valid JSON: " + str(error))
    
    if not isinstance(overrides, dict):
    
        raise raeg.errors.ConfigError("Config file " + str(path) + " must hold a JSON object")
    
    validate_config(overrides, require_all = require_all)
    
    return merge_config(DEFAULT_CONFIG, overrides)


def write_config(cfg, path):
    """ Write `cfg` as pretty-printed JSON. """
    with open(str(path), "w") as config_file:
    
        json.dump(cfg, config_file, indent = 4, sort_keys = True)
