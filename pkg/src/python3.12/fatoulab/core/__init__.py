#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-


__all__: list[str] = [
    'CArray', 'FArray', 'IArray', 'BArray', 'Point', 'RichReprable',
    'isRichReprable', 'Verdict', 'as_point',

    'FatouLabError', 'ConfigError', 'JetError', 'NotAttractingError',
    'NumericalFailure', 'SeparationFailure', 'TrappingFailure',
    'StableSetEmpty', 'NotConverged', 'MonotonicityViolation',

    'mix_seed', 'trial_rng', 'trial_rngs', 'cumulative', 'draw_indices',
    'index_blocks', 'map_trials', 'unit_ball',

    'TrialStats', 'describe_trials', 'Metrics',

    'MultiIndex', 'MonomialBasis', 'Jet', 'JetEvaluator', 'TermModel',
    'MapModel', 'jet_compose', 'jet_evaluate', 'linear_part', 'jet_iterate',
    'jet_parse', 'jet_dump', 'jet_to_model', 'jet_from_model',

    'MatrixEnsemble', 'Driver', 'IIDDriver', 'RotationDriver', 'CocycleSpec',
    'ProductSample', 'LyapunovSpectrum', 'DetIdentityReport',
    'InvariantForm', 'InvariantFormFailure', 'NormFloor', 'GrowthCheck',
    'expected_log_abs_det', 'sample_product', 'sample_products',
    'lyapunov_exponent', 'lyapunov_spectrum', 'oseledec_matrix',
    'det_identity_residual', 'find_invariant_form', 'operator_norm',
    'min_product_norm', 'log_norm_growth', 'haar_unitary',

    'Classification', 'decide', 'classify_ensemble', 'classify_germ_measure',
    'linear_ensemble', 'scaled',

    'IndexedGenerator', 'GermEnsemble', 'OrbitRecord', 'MembershipReport',
    'ContractionStats', 'TrappingReport', 'UniformTrapStats',
    'LimitMapEstimate', 'RankProfile', 'StableSet',
    'simulate_orbit', 'fatou_membership', 'contraction_statistics',
    'trapping_radius', 'uniform_trapping_check', 'limit_map_estimate',
    'rank_profile', 'stable_set', 'polydisc_grid',

    'GOLDEN_MEAN', 'ExampleName', 'ExampleId', 'build_example',
    'resolve_example', 'example_file', 'e1_log_coefficient',
    'e1_generator', 'e1_second_coefficient', 'e1_blowup_statistics',
    'e1_tail_probability', 'e1_tail_exact', 'SecondCoefficient',
    'BlowupStats', 'adversarial_orbit', 'AdversarialOrbit',
    'TentLayer', 'RotationTents', 'RotationEval', 'rotation_cocycle_eval',
    'BrjunoSum', 'brjuno_partial_sum',

    'load_ensemble', 'read_ensemble', 'dump_matrix_ensemble',
    'dump_germ_ensemble', 'dump_example', 'dumps_record', 'orbit_csv',
    'table_csv',
]

from .Types    import *  # noqa: F403
from .Streams  import *  # noqa: F403
from .Metrics  import *  # noqa: F403
from .Jets     import *  # noqa: F403
from .Cocycles import *  # noqa: F403
from .Classify import *  # noqa: F403
from .Germs    import *  # noqa: F403
from .Gallery  import *  # noqa: F403
from .Files    import *  # noqa: F403
