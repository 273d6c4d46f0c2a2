"""Panoramic depth geometry toolkit.

Intrinsics-free coordinate transforms on equirectangular panoramas,
cylindrical-coordinate depth encodings (with the classic HHA baseline),
spherical rotation resampling with disturbance-grid evaluation statistics,
and equator-symmetric region slicing with gated fusion routing.
"""

from .cloud import (
    DepthImage,
    GravityEstimate,
    NormalField,
    PointCloud,
    depth_to_cloud,
    estimate_gravity,
    estimate_normals,
    gravity_correct,
)
from .coords import (
    GridSpec,
    SphericalDir,
    cart_to_cyl,
    cyl_to_cart,
    dir_to_sph,
    grid_angles,
    grid_dirs,
    pixel_to_sph,
    sph_to_dir,
    sph_to_pixel,
    wrap_theta,
)
from .encoders import (
    EgviaParams,
    HaProfile,
    HhaImage,
    RelImage,
    egvia,
    encode_hha,
    encode_rel,
    ha_profile,
    height,
    lateral_angle,
    loa,
    normalize_channel,
    quantize_u8,
    rectified_depth,
    vertical_angle,
)
from .router import (
    GatePattern,
    Region,
    RegionGrid,
    apply_early_stop,
    fuse_cell,
    gate_hard,
    gate_soft,
    gate_usage_report,
    recombine,
    slice_regions,
    temperature_schedule,
    valid_patterns,
)
from .sga import (
    RotationSpec,
    SegEval,
    SgaPredictionError,
    SgaStats,
    rotate_depth,
    rotate_erp,
    seg_eval,
    seg_eval_from_confusion,
    sga_grid,
    sga_run,
    sga_stats,
    summarize,
)
from .synth import (
    LABEL_CEILING,
    LABEL_FLOOR,
    LABEL_NONE,
    LABEL_WALL,
    SynthScene,
    box_room,
    cylinder_wall,
    floor_plane,
    furnished_room,
    synth_scene,
)

__version__ = "0.1.0"
