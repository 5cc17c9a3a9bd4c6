"""Hyperspectral plume segmentation: emissivity conversion, PCA, midway
equalization, graph clustering, graph MBO and an AMSD detector."""
from .amsd import AdaptiveMatchedSubspaceDetector, SubspaceModel, amsd_statistic, detect
from .cluster import MetricKMeans, SpectralClusterer, kmeans, spectral_cluster
from .core import CubeFormatError, CubeKind, HyperCube, read_cube, write_cube
from .dimred import SpectralPCA, false_color
from .graph import build_graph, graph_eigs, nystrom_eigs, symmetric_laplacian
from .mbo import GinzburgLandauMBO, MboConfig, mbo_segment, segment_video
from .midway import MidwayEqualizer, midway_equalize
from .radiometry import EmissivityConverter, planck_excitance, radiance_to_emissivity
from .synth import Plume, SceneSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AdaptiveMatchedSubspaceDetector", "SubspaceModel", "amsd_statistic", "detect",
    "MetricKMeans", "SpectralClusterer", "kmeans", "spectral_cluster",
    "CubeFormatError", "CubeKind", "HyperCube", "read_cube", "write_cube",
    "SpectralPCA", "false_color",
    "build_graph", "graph_eigs", "nystrom_eigs", "symmetric_laplacian",
    "GinzburgLandauMBO", "MboConfig", "mbo_segment", "segment_video",
    "MidwayEqualizer", "midway_equalize",
    "EmissivityConverter", "planck_excitance", "radiance_to_emissivity",
    "Plume", "SceneSpec", "generate",
]
