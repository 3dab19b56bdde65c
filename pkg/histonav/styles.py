"""Plot appearance shared by every histonav figure."""

import matplotlib as mpl
import seaborn as sns

__all__ = [
    "settings",
    "class_colors",
    "set_defaults",
    "get_class_color",
]

settings = {
    "curves": {
        "train": {"linestyle": "-", "linewidth": 1.2},
        "val": {"linestyle": "--", "linewidth": 1.2},
    },
    "heatmap": {
        "cmap": "Purples",
        "annot": True,
        "fmt": "d",
        "cbar": False,
        "square": True,
    },
    "roc": {
        "classes": {"linewidth": 1},
        "macro": {"linewidth": 1.5, "linestyle": ":", "color": "black"},
        "chance": {"linewidth": 0.8, "linestyle": "--", "color": "0.6"},
    },
}

class_colors = [
    "#5b3f9c",  # hematoxylin purple
    "#e0558c",  # eosin pink
    "#2a9d8f",
    "#f4a261",
    "#264653",
    "#8ab17d",
]


def set_defaults(context="paper", style="ticks", dpi=140):
    """Apply the seaborn theme and reproducible SVG output settings.

    Text stays text in SVG files and element ids come from a fixed hash
    salt, so the same figure always serializes to the same bytes.

    Parameters
    ----------
    context : str, defaults to "paper"
        seaborn plotting context
    style : str, defaults to "ticks"
        seaborn axes style
    dpi : int, defaults to 140
        figure resolution
    """
    sns.set_theme(context=context, style=style, palette=class_colors)
    mpl.rcParams.update(
        {
            "figure.dpi": dpi,
            "svg.fonttype": "none",
            "svg.hashsalt": "histonav",
        }
    )


def get_class_color(k):
    """Color of class index k; cycles past the palette length."""
    return class_colors[k % len(class_colors)]


set_defaults()
