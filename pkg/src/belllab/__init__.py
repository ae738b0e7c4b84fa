"""Desk-scale Bell-test laboratory.

Simulate CHSH / detection-aware / entanglement-swapping experiments in a
lightcone-aware spacetime model, attack the logs with local-realist and
post-readout adversaries, defend with broadcast cloning, and statistically
audit event logs (including the published experiment counts) for
no-signaling violations and anomalies.
"""

__version__ = "0.1.0"

from .audit import (AuditReport, AuditTest, binned_ratio_test, correlator_equality_test,
                    marginal_counts, nosignaling_suite, two_proportion_test, two_rate_test)
from .counts import CountsTable
from .datasets import BundledDataset, bundled_dataset, dataset_names
from .eventlog import ClonedRecord, CopySnapshot, EventLog, LogMeta, RunManifest, TrialRecord
from .lhv import (ChshInput, DeterministicStrategy, EberhardInput, chsh_value,
                  eberhard_value, estimate_from_counts, lhv_bound)
from .quantum import (AnomalySetup, DensityMatrix, Povm, QOperator, QState,
                      anomaly_joint_prob, anomaly_outcome_prob, bell_singlet, born_sample,
                      broadcast_kraus, expectation, partial_trace, phase_observable,
                      singlet_correlator, swap_projector, tensor)
from .sim import (AttackerConfig, HackerConfig, PAPER_ANGLES, SimConfig, TimingModel,
                  clone_records, run_hacked_lhv, run_lhv, run_quantum, tamper_copies,
                  verify_clones)
from .spacetime import (LayoutConfig, SpacetimeEvent, ValidationReport,
                        default_chsh_layout, default_swapping_layout,
                        effective_event_shift, interval_class, validate_layout)
from .vacuum import (FourVector, InvariantCorrelator, conservation_forces_zero,
                     correlator_tensor, minkowski_dot, realism_admissible)
