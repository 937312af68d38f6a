""" **plotting.py** plots loss curves and image grids with matplotlib. """
import raeg
import csv
import pathlib
import matplotlib.figure


def read_loss_table(path):
    """ Read a loss table written by `raeg.training.RAEGTrainer` as a dict of float columns. """
    columns = {}
    
    with open(str(path), newline = "") as table_file:
    
        for row in csv.DictReader(table_file):
        
            for key, value in row.items():
            
                try:
                
                    columns.setdefault(key, []).append(float(value))
                    
                except (TypeError, ValueError):
                
                    continue
    
    return columns


def plot_loss_curves(table_path, figure_path, terms = ("prt", "rev", "cls", "gan", "dis", "total")):
    """ Plot the logged loss terms against the step and save the figure. """
    columns = read_loss_table(table_path)
    
    figure = matplotlib.figure.Figure(figsize = (8., 5.))
    
    axes = figure.add_subplot(1, 1, 1)
    
    for term in terms:
    
        if (term in columns) and (len(columns[term]) == len(columns.get("step", []))):
        
            axes.plot(columns["step"], columns[term], label = term)
    
    axes.set_xlabel("step")
    
    axes.set_ylabel("loss")
    
    axes.set_yscale("symlog", linthresh = 1.e-3)
    
    axes.legend()
    
    axes.grid(True)
    
    raeg.helpers.mkdir_p(pathlib.Path(figure_path).parent)
    
    figure.savefig(str(figure_path), dpi = 100)
    
    return figure


def save_image_grid(rows, figure_path, row_labels = None, max_columns = 8):
    """ Save a grid with one row per [B, 3, H, W] batch in `rows`, e.g. (original, protected, recovered). """
    columns = min(max_columns, min(batch.shape[0] for batch in rows))
    
    figure = matplotlib.figure.Figure(figsize = (1.5*columns, 1.5*len(rows)))
    
    for i, batch in enumerate(rows):
    
        for j in range(columns):
        
            axes = figure.add_subplot(len(rows), columns, i*columns + j + 1)
            
            axes.imshow(raeg.datasets.to_uint8(batch[j]))
            
            axes.set_xticks([])
            
            axes.set_yticks([])
            
            if (j == 0) and (row_labels is not None):
            
                axes.set_ylabel(row_labels[i])
    
    figure.tight_layout()
    
    raeg.helpers.mkdir_p(pathlib.Path(figure_path).parent)
    
    figure.savefig(str(figure_path), dpi = 100)
    
    return figure


def amplified_difference(a, b, gain = 10.):
    """ 0.5 + gain*(b - a), clipped to [0, 1], for visualizing small perturbations. """
    return (0.5 + gain*(b - a)).clamp(0., 1.)
