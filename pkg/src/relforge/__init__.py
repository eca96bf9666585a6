"""relforge: batch toolkit for multilingual e-commerce search relevance.

Modules: textnorm (cleaning pipeline), pathcat (category paths and depth
markers), lexical (token overlap and hybrid scoring), toymodel (hashed-
feature classifier with label smoothing and EMA self-distillation),
calibrate (threshold and weight tuning), metrics (positive-class F1),
dataio (records, predictions, splits, translation providers), cli.
"""

__version__ = "0.1.0"
