"""Bundled example data: config presets, the default reference stain
profile and the synthetic stained-texture generator.
"""

from histonav.examples import synthetic

__all__ = ["synthetic"]
