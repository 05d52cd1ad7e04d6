"""Grid-based motion clustering of feature correspondences."""
from .clustering import (ClusterInfo, ClusterMap, Label, LabelMap, eliminate_small, fuse_passes,
                         label_matches, merge_clusters, suppress_duplicates)
from .geometry import (SE3, STATIC, Correspondence, Matches, MotionBin, Residual, quantize,
                       residual, residuals, transform_point)
from .grid import (CellDecision, CellStats, GridConfig, GridGeometry, GridTensor, QuadNode, Verdict,
                   assign, cell_stats, classify_cell, run_passes, subdivide)
from .pipeline import FilterReport, PipelineConfig, PipelineError, bench, gmc_filter, run_filter_pipeline
from .pose_eval import (ClassificationMetrics, RansacParams, Trajectory, TrajectoryMetrics, ate,
                        classification_metrics, estimate_pose, refine_pose, rigid_align, rpe)
from .simulator import GroundTruth, Intrinsics, ObjectSpec, SceneConfig, generate, inject_false_matches
from .stats import (SeparabilityReport, StatModel, monte_carlo_check, p_false, p_true, separability,
                    support_threshold)

__version__ = "0.1.0"
