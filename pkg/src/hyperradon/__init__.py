"""Exact Radon transforms of axis-aligned boxes and voxel images.

Submodules
----------
geometry            section areas and slab volumes of boxes
voxel               discrete transform of voxel images, RVOX files
directions          direction sets on circles and spheres
mc_oracle           Monte Carlo estimates of section areas
ingest              meshes, voxelisation, synthetic shapes, affine maps
trace_features      trace transform features of 3D sinograms
nrcdt               normalised quantile profiles
classify            nearest-neighbour experiments
sliced_wasserstein  sliced distances, box mixture fits and barycenters
cli                 command line entry point
"""

from .geometry import cube_plane_area, cube_slab_volume
from .voxel import Sinogram, VoxelImage, sinogram

__version__ = "0.1.0"

__all__ = ["Sinogram", "VoxelImage", "cube_plane_area", "cube_slab_volume", "sinogram", "__version__"]
