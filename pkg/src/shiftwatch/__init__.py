"""Locomotive cab operator shift monitoring.

Faces are located with a HOG sliding-window detector (or any FaceDetector),
aligned to a 68-point template, embedded into 128-d unit vectors, matched
against an enrollment gallery, and tracked into shift sessions that raise
overtime and trespass alerts.
"""
from .align import (AlignedFace, LandmarkSidecar, LandmarkTemplate, SimilarityTransform,
                    align_face, estimate_similarity, warp_face)
from .detect import (HogDescriptor, HogFaceDetector, HogParams, LinearDetectorModel,
                     compute_gradients, hog_descriptor, non_max_suppression, sliding_window_detect)
from .embed import (EMBEDDING_DIM, MockEmbeddingProvider, TripletConfig, distance, l2_normalize,
                    mock_embed, triplet_loss)
from .gallery import (Gallery, MatchPolicy, MatchResult, OperatorRecord, enroll, load_gallery,
                      match, save_gallery)
from .imaging import BoundingBox, GrayImage, LandmarkSet, iou, to_grayscale
from .kernels import BACKEND
from .report import DailyReport, ReportRow, generate_report, render_report
from .tracker import (AlertEvent, AlertKind, Observation, ShiftSession, ShiftTracker, TrackerConfig,
                      shift_duration)

__version__ = "0.1.0"
