"""Action classification of video clips from selective spatio-temporal
interest points, 3D-SIFT descriptors and spectral-regression KDA."""

__version__ = "0.1.0"

from .classify import NearestCentreClassifier, evaluate, predict, train_model  # noqa: E402
from .detect import DetectorConfig, SSTIPDetector, detect_sstip  # noqa: E402
from .pipeline import VideoSignatureExtractor  # noqa: E402
from .sift3d import SIFT3D, DescriptorConfig, describe_keypoints  # noqa: E402
from .srkda import SRKDA, KernelConfig  # noqa: E402
from .video_io import FrameVolume, generate_synthetic, load_frames  # noqa: E402

__all__ = [
    "DescriptorConfig", "DetectorConfig", "FrameVolume", "KernelConfig",
    "NearestCentreClassifier", "SIFT3D", "SRKDA", "SSTIPDetector",
    "VideoSignatureExtractor", "describe_keypoints", "detect_sstip", "evaluate",
    "generate_synthetic", "load_frames", "predict", "train_model",
]
