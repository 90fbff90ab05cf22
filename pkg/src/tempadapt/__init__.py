"""Indoor-temperature forecasting with an LSTM backbone, building-aware branches and adversarial domain adaptation."""

__version__ = "0.1.0"
