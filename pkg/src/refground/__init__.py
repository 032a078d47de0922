"""Interactive grounding of referring expressions over synthetic scenes."""

from .dialog import (DialogState, Question, dialog_step, generate_question,
                     informativeness, start_dialog, state_hash, transcript_entry)
from .evaluation import (BenchConfig, BenchmarkReport, iou, make_utterance,
                         run_benchmark, simulate_dialog)
from .errors import (ConfigError, DialogStateError, EmptyExpressionError,
                     GroundingError, InfeasibleConfigError, ProjectionError,
                     SceneFormatError, UnknownRegionError, UnknownViewpointError)
from .expressions import (Expression, ExpressionDistribution, Vocabulary, decode,
                          default_vocabulary, describe_region, describe_relation,
                          with_decode_noise)
from .perspective import (PerspectiveConfig, detect_perspective, transform_region,
                          transform_scene)
from .pipeline import (CandidateSet, EngineConfig, GroundingOutcome, ScoredCandidate,
                       ScoredPair, cluster_relevant, ground, ground_expression,
                       ground_relational, score_self_referential)
from .scene import (AttributeRecord, BoundingBox, CorpusConfig, GroundTruth, Region,
                    Scene, Viewpoint, WHOLE_IMAGE_ID, generate_scene, load_scene,
                    save_scene, scene_to_dict)
from .scoring import (MeteorConfig, ScorePair, cross_entropy_loss, meteor,
                      meteor_alignment, tokenize)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
