""" **datasets.py** reads class-folder image datasets and writes image folders.

A dataset root holds one subdirectory per class. Class indices are assigned to the
alphabetically sorted class names. Each class is split deterministically into train and test
files by sorting its files on a hash of (seed, filename); with the default ratio 9:1,
a class of 10 images gives 9 training and 1 test image.

Decoded and resized splits are cached as .npz files in the directory named by the
environment variable RAEG_CACHE, if it is set.
"""
import raeg
import dataclasses
import hashlib
import json
import math
import os
import pathlib
import numpy
import PIL.Image
import PIL.ImageDraw
import torch


IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".tif", ".tiff")

LABELS_FILENAME = "labels.json"


@dataclasses.dataclass
class DatasetLayout:
    """ A class-folder dataset and its deterministic train/test split.
    
    Parameters
    ----------
    root : string
    
    seed : int
    
    train_ratio : float
    """
    root: str
    
    seed: int = 0
    
    train_ratio: float = 0.9
    
    def __post_init__(self):
    
        self.root = str(self.root)
        
        if not (0. < self.train_ratio < 1.):
        
            raise raeg.errors.ConfigError("train_ratio must lie in (0, 1)", keys = ("data.train_ratio",))
        
        root = pathlib.Path(self.root)
        
        if not root.is_dir():
        
            raise raeg.errors.DatasetError("Dataset root is not a directory", paths = (root,))
        
        self.class_names = sorted(p.name for p in root.iterdir() if p.is_dir())
        
        if len(self.class_names) == 0:
        
            raise raeg.errors.DatasetError("Dataset is empty", paths = (root,))
        
        self.files = {}
        
        too_small = []
        
        for name in self.class_names:
        
            files = sorted(
                p for p in (root/name).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
            
            if len(files) < 2:
            
                too_small.append(root/name)
            
            self.files[name] = files
        
        if too_small:
        
            raise raeg.errors.DatasetError("Every class needs at least 2 images", paths = too_small)
    
    @property
    def num_classes(self):
    
        return len(self.class_names)
        
    @property
    def class_to_index(self):
    
        return {name: index for index, name in enumerate(self.class_names)}
    
    def _split_key(self, path):
    
        return hashlib.sha256((str(self.seed) + "/" + path.name).encode("utf-8")).hexdigest()
    
    def split(self, split):
        """ Return the list of (path, label) of the "train" or "test" split. """
        if split not in ("train", "test"):
        
            raise raeg.errors.ConfigError("Unknown split '" + str(split) + "', expected 'train' or 'test'")
        
        items = []
        
        for label, name in enumerate(self.class_names):
        
            files = sorted(self.files[name], key = self._split_key)
            
            test_count = min(len(files) - 1, max(1, int(round(len(files)*(1. - self.train_ratio)))))
            
            chosen = files[test_count:] if split == "train" else files[:test_count]
            
            items += [(path, label) for path in sorted(chosen)]
        
        return items
    
    def write_labels(self, path):
        """ Write the class name to index mapping as JSON. """
        with open(str(path), "w") as labels_file:
        
            json.dump(self.class_to_index, labels_file, indent = 4, sort_keys = True)


def read_labels(path):
    
    with open(str(path)) as labels_file:
    
        return json.load(labels_file)


def read_image(path, image_size = None):
    """ Decode an image file to a [3, H, W] float32 tensor in [0, 1], optionally resized bilinearly. """
    with PIL.Image.open(str(path)) as image:
    
        image = image.convert("RGB")
        
        if (image_size is not None) and (image.size != (image_size, image_size)):
        
            image = image.resize((image_size, image_size), PIL.Image.BILINEAR)
        
        array = numpy.asarray(image, dtype = numpy.uint8)
    
    return torch.from_numpy(array.copy()).permute(2, 0, 1).float()/255.


def to_uint8(image):
    """ Convert a [3, H, W] tensor in [0, 1] to a [H, W, 3] uint8 array, rounding to the nearest level. """
    return torch.round(image.detach().clamp(0., 1.)*255.).to(torch.uint8).permute(1, 2, 0).cpu().numpy()


def write_image(image, path):
    """ Write a [3, H, W] tensor in [0, 1] as a lossless 8-bit PNG file. """
    path = pathlib.Path(path)
    
    raeg.helpers.mkdir_p(path.parent)
    
    PIL.Image.fromarray(to_uint8(image)).save(str(path), format = "PNG")


def list_images(directory):
    """ All image files below `directory`, sorted, as paths relative to it. """
    directory = pathlib.Path(directory)
    
    return sorted(
        p.relative_to(directory) for p in directory.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def read_image_folder(directory, image_size = None):
    """ Read every image below `directory`, returning (relative paths, [N, 3, H, W] tensor). 
    
    Raises `raeg.errors.DatasetError` listing every file that cannot be decoded.
    """
    paths = list_images(directory)
    
    images = []
    
    unreadable = []
    
    for path in paths:
    
        try:
        
            images.append(read_image(pathlib.Path(directory)/path, image_size))
            
        except (OSError, ValueError):
        
            unreadable.append(pathlib.Path(directory)/path)
    
    if unreadable:
    
        raise raeg.errors.DatasetError("Cannot decode images", paths = unreadable)
    
    if not images:
    
        raise raeg.errors.DatasetError("No images found", paths = (directory,))
    
    return paths, torch.stack(images)


class ImageSplit(torch.utils.data.Dataset):
    """ One split of a `DatasetLayout`, decoded and resized in memory as uint8. """
    def __init__(self, layout, split, image_size):
    
        self.layout = layout
        
        self.split = split
        
        self.image_size = image_size
        
        self.items = layout.split(split)
        
        self.images, self.labels = self._load()
        
    def _cache_path(self):
    
        cache_dir = os.environ.get("RAEG_CACHE")
        
        if not cache_dir:
        
            return None
        
        key = hashlib.sha256(json.dumps([
            os.path.abspath(self.layout.root),
            self.split,
            self.image_size,
            self.layout.seed,
            self.layout.train_ratio,
            [str(path) for path, _ in self.items]]).encode("utf-8")).hexdigest()[:16]
        
        return pathlib.Path(cache_dir)/("split_" + key + ".npz")
        
    def _load(self):
    
        cache_path = self._cache_path()
        
        if (cache_path is not None) and cache_path.is_file():
        
            with numpy.load(str(cache_path)) as cached:
            
                return torch.from_numpy(cached["images"]), torch.from_numpy(cached["labels"])
        
        images = []
        
        unreadable = []
        
        for path, label in self.items:
        
            try:
            
                images.append(torch.round(read_image(path, self.image_size)*255.).to(torch.uint8))
                
            except (OSError, ValueError):
            
                unreadable.append(path)
        
        if unreadable:
        
            raise raeg.errors.DatasetError("Cannot decode images", paths = unreadable)
        
        images = torch.stack(images)
        
        labels = torch.tensor([label for _, label in self.items], dtype = torch.int64)
        
        if cache_path is not None:
        
            raeg.helpers.mkdir_p(cache_path.parent)
            
            numpy.savez(str(cache_path), images = images.numpy(), labels = labels.numpy())
        
        return images, labels
    
    def __len__(self):
    
        return len(self.items)
        
    def __getitem__(self, index):
    
        return self.images[index].float()/255., self.labels[index]
    
    def tensors(self):
        """ The whole split as ([N, 3, H, W] float tensor, [N] labels). """
        return self.images.float()/255., self.labels.clone()


class TensorSplit(torch.utils.data.Dataset):
    """ A split given directly as tensors, e.g. a protected copy of an `ImageSplit`. """
    def __init__(self, images, labels):
    
        self.images = images
        
        self.labels = labels
        
    def __len__(self):
    
        return self.images.shape[0]
        
    def __getitem__(self, index):
    
        return self.images[index], self.labels[index]
        
    def tensors(self):
    
        return self.images, self.labels


def make_loader(dataset, batch_size, seed = 0, shuffle = True, num_workers = 0, drop_last = False):
    """ A `torch.utils.data.DataLoader` whose batch order is fully determined by `seed`. """
    generator = torch.Generator()
    
    generator.manual_seed(seed)
    
    return torch.utils.data.DataLoader(
        dataset, 
        batch_size = batch_size, 
        shuffle = shuffle, 
        num_workers = num_workers,
        drop_last = drop_last,
        generator = generator)


def load_dataset(layout, split, image_size, batch_size = 8, seed = 0, shuffle = None, num_workers = 0):
    """ Return a loader of (images, labels) batches of one split.
    
    Training batches are shuffled by default, test batches are not.
    """
    if image_size <= 0:
    
        raise raeg.errors.ConfigError("image_size must be positive", keys = ("data.image_size",))
    
    if shuffle is None:
    
        shuffle = (split == "train")
    
    return make_loader(
        ImageSplit(layout, split, image_size), 
        batch_size, 
        seed = seed, 
        shuffle = shuffle, 
        num_workers = num_workers)


TOY_SHAPES = ("circle", "square", "triangle", "cross", "ring")

TOY_PALETTES = {
    "warm": ((200, 40, 40), (230, 120, 20), (220, 180, 30)),
    "cool": ((40, 60, 200), (30, 150, 170), (60, 170, 70)),
    "mono": ((30, 30, 30), (120, 120, 120), (235, 235, 235))}


def toy_class_names(num_classes):
    
    names = [palette + "_" + shape for palette in TOY_PALETTES for shape in TOY_SHAPES]
    
    if not (2 <= num_classes <= len(names)):
    
        raise raeg.errors.ConfigError("Toy datasets support 2 to " + str(len(names)) + " classes")
    
    return names[:num_classes]


def draw_toy_image(rng, shape, palette, image_size):
    """ Draw one shape in a palette colour over a noisy random background. """
    background = rng.integers(60, 200, size = 3)
    
    noise = rng.normal(0., 12., size = (image_size, image_size, 3))
    
    canvas = numpy.clip(background + noise, 0, 255).astype(numpy.uint8)
    
    image = PIL.Image.fromarray(canvas)
    
    draw = PIL.ImageDraw.Draw(image)
    
    colour = tuple(int(c) for c in numpy.clip(
        numpy.array(TOY_PALETTES[palette][rng.integers(0, 3)]) + rng.integers(-20, 21, size = 3), 0, 255))
    
    radius = rng.uniform(0.18, 0.32)*image_size
    
    cx, cy = rng.uniform(radius, image_size - radius, size = 2)
    
    box = (cx - radius, cy - radius, cx + radius, cy + radius)
    
    thickness = max(2, int(radius/3))
    
    if shape == "circle":
    
        draw.ellipse(box, fill = colour)
        
    elif shape == "square":
    
        draw.rectangle(box, fill = colour)
        
    elif shape == "triangle":
    
        draw.polygon([(cx, cy - radius), (cx - radius, cy + radius), (cx + radius, cy + radius)], fill = colour)
        
    elif shape == "cross":
    
        draw.rectangle((cx - radius, cy - thickness/2, cx + radius, cy + thickness/2), fill = colour)
        
        draw.rectangle((cx - thickness/2, cy - radius, cx + thickness/2, cy + radius), fill = colour)
        
    else:
    
        draw.ellipse(box, outline = colour, width = thickness)
    
    return image


def write_toy_dataset(root, num_classes = 10, images_per_class = 500, image_size = 64, seed = 0):
    """ Write a procedurally drawn class-folder PNG dataset, returning its `DatasetLayout`. 
    
    Classes combine a shape with a colour palette; position, size, colour jitter and
    background vary randomly per image.
    """
    rng = numpy.random.default_rng(seed)
    
    root = raeg.helpers.mkdir_p(root)
    
    digits = max(4, int(math.log10(max(images_per_class, 1))) + 1)
    
    for name in toy_class_names(num_classes):
    
        palette, shape = name.split("_")
        
        class_dir = raeg.helpers.mkdir_p(root/name)
        
        for i in range(images_per_class):
        
            image = draw_toy_image(rng, shape, palette, image_size)
            
            image.save(str(class_dir/(name + "_" + str(i).zfill(digits) + ".png")), format = "PNG")
    
    print("Wrote toy dataset with " + str(num_classes) + " classes to " + str(root))
    
    return DatasetLayout(str(root), seed = seed)
