"""slipcount: slip-image counting and audit pipeline.

Library surface:

- :mod:`slipcount.registry` / :mod:`slipcount.fixtures` -- party-symbol
  registry, confusable-pair scan, synthetic fixture symbols
- :mod:`slipcount.augment` / :mod:`slipcount.dataset` -- the 19-variant
  augmentation recipe and labeled-dataset construction/splitting
- :mod:`slipcount.classifier` -- nearest-centroid reference model with
  calibrated confidence, evaluation, low-recall flagging
- :mod:`slipcount.tally` -- per-machine counting, review queue,
  adjudication, reconciliation, timestamp rate anomalies
- :mod:`slipcount.simulate` -- counting-day throughput projection
- :mod:`slipcount.service` -- HTTP adjudication service with an
  append-only journal
- :mod:`slipcount.cli` -- scripted entry point for every stage
"""

__version__ = "0.1.0"
