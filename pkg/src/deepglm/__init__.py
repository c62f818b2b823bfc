"""deepglm: a small deep-learning and Bayesian-regularization toolkit.

Subpackages cover the numeric core (rng, linalg, identities), feed-forward
networks and their optimizers (nnet, optim), Bayesian regularization
(bayes), classical dimension reduction (shallow), partition geometry and
trees (geom, tree), the tabular pipeline with ranking metrics (tabular,
metrics, synth), and figure/CSV reporting plus the command line (report,
cli).
"""

__version__ = "0.1.0"
