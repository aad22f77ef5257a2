"""Age-aware gaze analysis and age-adapted saliency prediction."""

from .data import AgeGroup, FixationRecord, GazeDataset, ImageInfo, StimulusCategory

__all__ = ["AgeGroup", "FixationRecord", "GazeDataset", "ImageInfo", "StimulusCategory"]
__version__ = "0.1.0"
