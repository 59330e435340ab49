"""Cooperative fault-tolerant control toolkit.

Synthesis, simulation, and verification for networks of heterogeneous
linear agents that track a pinned source signal while estimating and
rejecting additive sensor faults:

* :mod:`coopftc.linalg`    -- contract-checked dense linear algebra
* :mod:`coopftc.graph`     -- pinned interaction topologies
* :mod:`coopftc.plant`     -- agent/network models and fault augmentation
* :mod:`coopftc.synth`     -- LMI-based observer and feedback synthesis
* :mod:`coopftc.estimator` -- realizable augmented-state observer
* :mod:`coopftc.control`   -- cooperative control law and closed loop
* :mod:`coopftc.sim`       -- fixed-step simulation and traces
* :mod:`coopftc.analysis`  -- certificates and trace verification
* :mod:`coopftc.cli`       -- scenario files and the ``coopftc`` entry point
"""

__version__ = "0.1.0"
