"""Gesture sequences from frame-level probabilities, sequence features, and outcome statistics."""
from .core import (DEFAULT_ALPHABET, FrameProbabilityStream, GestureAlphabet, GestureError,
                   GestureEvent, GestureSequence, OutcomeTable, ParseError, ValidationError,
                   frame_labels_from_sequence, parse_gesture_sequence, parse_outcomes,
                   parse_probability_stream)
from .cv import CvConfig, CvReport, cross_validate, fit_baseline, stratified_folds
from .features import (FeatureMatrix, FeatureSchema, FeatureVector, assemble_feature_vector,
                       featurize)
from .metrics import AucReport, frame_level_auc, roc_auc, video_level_auc
from .segmentation import (BACKEND, SegmentationConfig, aggregate, label_segments,
                           pelt_changepoints, rbf_cost, resolve_gamma)
from .stats import (ConcordanceReport, cohens_d, concordance, pearson_r, rank_features,
                    t_test_two_sample)
from .synthetic import OutcomeModel, SynthConfig, generate_cohort, generate_sequence, render_stream

__version__ = "0.1.0"
