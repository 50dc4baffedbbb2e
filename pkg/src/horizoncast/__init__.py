"""Long-horizon panel forecasting with expectation-biased LSTM networks.

The package trains from-scratch LSTM forecasters on panel data and fights
long-horizon error decay by replacing unavailable future feature inputs with
expectation estimates: population means or K-means cluster centers, blended
by a user-chosen beta(t) schedule.
"""

from .bias import (
    BetaSchedule,
    BiasSpec,
    KMeansModel,
    PopulationStats,
    assign_cluster,
    beta_value,
    cluster_bias,
    compute_population_means,
    kmeans_fit,
    make_bias_inputs,
    mean_silhouette,
    population_average_bias,
    silhouette_select_k,
)
from .data import (
    Entity,
    FeatureTransform,
    PanelDataset,
    PanelSchema,
    SynthSpec,
    difference_apply,
    difference_invert,
    gen_synthetic,
    hot_deck_impute,
    load_panel_csv,
    standardize_apply,
    standardize_fit,
    standardize_invert,
    to_supervised,
    train_val_split,
    truncate_entities,
    write_panel_csv,
)
from .evaluate import ComparisonTable, HorizonReport, compare_reports, emit_outputs, horizon_mae
from .exceptions import (
    ConfigError,
    DataError,
    DegenerateDataError,
    HorizoncastError,
    ShapeError,
    TrainingError,
)
from .losses import mae_loss, target_replication_loss, weighted_feature_loss
from .models import (
    ForecastResult,
    Model1Config,
    Model2Config,
    TrainedForecaster,
    forecast,
    forecast_dataset,
    forecast_model1,
    forecast_model2,
    forecast_persistence,
    load_forecaster,
    save_forecaster,
    train_model1,
    train_model2,
    train_univariate,
    transform_dataset,
)
from .network import (
    AdamState,
    CellCache,
    LstmLayerParams,
    LstmLayerState,
    StackedNetwork,
    adam_step,
    init_params,
    lstm_cell_backward,
    lstm_cell_forward,
    network_backward,
    network_forward,
    network_step,
)

__version__ = "0.1.0"
