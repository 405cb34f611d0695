"""Hierarchical temperature imaging for 32-beam absorption tomography.

Forward modeling on a hybrid fine/coarse mesh, pseudo-inverse
pre-reconstruction, small convolutional reconstruction networks with
hand-built backpropagation, and quantitative noise-sweep evaluation.
"""

from .config import default_config, load_config
from .geometry import (
    BeamSet,
    GeometryError,
    SensingMesh,
    SensitivityMatrix,
    build_beams,
    build_mesh,
    build_sensitivity,
    clip_beam,
    traverse_chords,
)
from .imaging import export_image, vector_to_image
from .phantom import (
    Dataset,
    GaussianBlob,
    PhantomParams,
    Sample,
    build_dataset,
    draw_sample,
    gaussian_field,
    rasterize,
)
from .pinv import PseudoInverse, pre_reconstruct, pseudo_inverse
from .spectroscopy import (
    TransitionLine,
    absorbance_density,
    add_noise,
    forward_project,
    line_strength,
)

__version__ = "0.1.0"
