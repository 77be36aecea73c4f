"""Soccer team defense valuation from event and tracking streams.

Pipeline: ingest (or synthesize) a corpus of matches, label every event
with ball-recovery / being-attacked / goal look-ahead targets, build
139-dimensional game-state features, cross-validate boosted-tree
classifiers by schedule week, and turn the out-of-fold probabilities into
per-event, per-team-match and per-season defensive values with an
attribution and correlation reporting layer on top.
"""

__version__ = "0.1.0"
