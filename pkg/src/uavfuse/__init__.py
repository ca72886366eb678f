"""GPS/IMU and channel-parameter fusion for predictive UAV beamforming."""

__version__ = "0.1.0"
