"""Shape-from-polarization toolkit.

Synthesizes physically-based polarization images from known geometry,
recovers surface normals by inverting the diffuse-reflection model,
integrates normals into refined depth maps via sparse least squares, and
deforms coarse meshes toward the refined depth, with evaluation metrics
for normals, joints and surfaces.
"""
from .core import (
    AngleMaps,
    BodyParams,
    CameraIntrinsics,
    DepthMap,
    DoPMap,
    LabelMap,
    NormalMap,
    PolarizationImage,
    PolarshapeError,
    ProbMaps,
    Skeleton,
    StokesMaps,
    TriMesh,
    angles_from_normal,
    normal_from_angles,
)
from .forward import (
    RefractiveIndex,
    SyntheticScene,
    add_noise,
    add_noise_and_quantize,
    dop_from_zenith,
    dop_max,
    normals_from_depth,
    quantize_8bit,
    render_scene,
    synthesize_polarization,
)
from .inverse import (
    ambiguous_normals,
    azimuth_dop,
    disambiguate_oracle,
    disambiguate_propagate,
    fuse_normals,
    generate_labels,
    mean_angular_error,
    normal_loss,
    stokes_decompose,
    zenith_from_dop,
)
from .integrate import (
    DepthSolution,
    IntegrationWeights,
    SparseSystem,
    assemble_system,
    refine_depth,
    solve_depth,
)
from .meshops import (
    deform_to_depth,
    icosphere,
    mpjpe,
    param_loss,
    render_base_depth,
    scaled_rigid_icp,
    surface_error,
    umeyama_similarity,
    upsample_mesh,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
