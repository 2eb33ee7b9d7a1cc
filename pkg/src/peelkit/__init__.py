"""peelkit: peeled depth-map geometry engine.

Multi-hit BVH ray tracing, peeled map encode/decode, prior-offset fusion,
map-space objectives, chamfer/point-to-surface metrics, and garment-body
subtraction dataset tooling.
"""

from .bvh import Bvh, build_bvh, intersect_all, surface_distances, trace_batch
from .codec import (ColoredPointCloud, PeeledMapStack, decode_pointcloud,
                    encode_peeled, export_depth_png, read_peel,
                    subsample_uniform, write_peel)
from .dataset import (SubtractionConfig, make_ground_truth,
                      occluded_body_faces, subtract_body)
from .errors import (DimensionMismatch, EmptyCloud, EmptyMesh, InvalidFormat,
                     MissingRgb, PeelkitError)
from .fusion import (ResidualDeformationStack, compute_rd_gt, fuse_maps,
                     fusion_mask, read_rd_peel, resort_layers, write_rd_peel)
from .geometry import (Hit, HitList, PinholeCamera, Ray, TriangleMesh,
                       merge_meshes, rotate_yaw)
from .losses import (LossReport, LossWeights, image_gradients, loss_peel,
                     loss_rd, loss_rgb, loss_smooth, total_loss)
from .meshio import load_mesh, read_obj, read_ply, save_mesh, write_obj, write_ply
from .metrics import (MetricReport, chamfer_directional, chamfer_distance,
                      evaluate, point_to_surface, sample_surface)

__version__ = "0.1.0"
