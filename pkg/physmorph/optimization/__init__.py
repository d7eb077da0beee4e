from physmorph.optimization.fusion import GradientBundle, fuse, pcgrad
from physmorph.optimization.optimizer import ControlOptimizer
from physmorph.optimization.scene import Scene, make_target_images
from physmorph.optimization.chain import (
    RenderEvaluation,
    RenderedState,
    SplatStatistics,
    chain_render_to_controls,
    evaluate_render,
    render_state,
    render_timesteps,
    splat_statistics,
)
from physmorph.optimization.checkpoint import (
    TrainingCheckpoint,
    checkpoint_path,
    latest_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from physmorph.optimization.artifacts import (
    EPISODE_LOG,
    EVALUATION_LOG,
    snapshot_path,
    write_episode_artifacts,
    write_frames,
)
from physmorph.optimization.episode import (
    EpisodeResult,
    PassFailedError,
    Trainer,
    TrainingResult,
    initial_physics_loss,
    run_training,
)
from physmorph.optimization.evaluation import evaluate_state
