"""Long-gap imputation for multivariate time series.

Reconstructs one contiguous gap in a target variable using a feed-forward
network whose architecture (including the input lag) is tuned by
surrogate-model optimization, and benchmarks the fill against classic
interpolation baselines on artificial gaps with known truth.
"""

from .baselines import (
    SeasonalProfile,
    interpolate_linear,
    interpolate_spline,
    locf,
    seasonal_interpolate,
)
from .errors import (
    ConfigError,
    DataError,
    GapfillError,
    SpaceExhausted,
    TrainingDiverged,
)
from .evaluation import (
    CellResult,
    ExperimentPlan,
    ImputationReport,
    emit_report,
    make_artificial_gap,
    rmse,
    run_experiment,
)
from .hpo import (
    HpoConfig,
    HyperparameterSpace,
    PointEvaluation,
    evaluate_point,
    fit_gp,
    fit_rbf,
    latin_hypercube,
    optimize,
    propose_next,
)
from .imputer import ImputationModel, finalize_model, impute, load_model, save_model
from .mlp import (
    MlpArchitecture,
    MlpModel,
    TrainConfig,
    adam_step,
    forward,
    gradients,
    init_model,
    mse,
    train,
)
from .series import (
    GapSpec,
    LaggedTable,
    MultivariateSeries,
    Scaler,
    add_temporal_features,
    apply_scaler,
    attach_gap,
    build_lagged_table,
    find_gap,
    fit_scaler,
    invert_target,
    read_csv_table,
    reduce_lagged_table,
    split_train_val,
    validate_series,
)

__version__ = "0.1.0"
