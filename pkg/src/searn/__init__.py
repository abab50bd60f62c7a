"""Learning to search for structured prediction.

An iterative reduction of structured prediction to cost-sensitive
classification, with task plugins for document clustering, sequence
labeling and shift-reduce dependency parsing, plus EM baselines and
synthetic data generators for desk-scale experiments.
"""

__version__ = "0.1.0"
