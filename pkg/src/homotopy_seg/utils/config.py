"""
Configuration management for homotopy-seg.

This module handles run configuration: loss weights, model size, training
schedule, synthetic data generation, evaluation and logging settings.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional, Union

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


DEFAULT_CONFIG: Dict[str, Any] = {
    "loss": {
        "beta": 0.5,
        "lambda_smooth": 1.0,
        "epsilon": 1e-6,
        "clamp": 1e-7,
        "normalize_smooth": False
    },
    "model": {
        "c_in": 3,
        "c_hidden": 8
    },
    "train": {
        "epochs": 100,
        "batch_size": 8,
        "seed": 0,
        "alpha_start": 1e-5,
        "alpha_end": 1e-5,
        "t_granularity": "step",
        "t_max": 1.0,
        "mode": "multi_objective",
        "augment": True
    },
    "data": {
        "scenes": 4,
        "width": 1120,
        "height": 1120,
        "grass_fraction": 0.5,
        "fence_lines": 0,
        "elevations": [10.0],
        "patch_size": 224,
        "split_ratio": 0.9,
        "brush_diameter": 64,
        "seed": 0
    },
    "eval": {
        "threshold": None,      # None -> calibrated EER threshold
        "labels": "brush"       # brush | true
    },
    "gradcheck": {
        "instances": 100,
        "sizes": ["4x4", "8x8"],
        "loss_step": 1e-5,
        "model_step": 1e-4,
        "loss_rtol": 1e-4,
        "model_rtol": 1e-3,
        "seed": 0
    },
    "logging": {
        "level": "INFO",
        "file": None,
        "max_size": 10485760,  # 10MB
        "backup_count": 5
    },
    "run": {}
}


class Config:
    """Configuration manager for runs."""
    
    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        """Initialize configuration.
        
        Args:
            config_file: Path to a JSON configuration file. If None, the
                built-in defaults are used and nothing is written to disk.
        """
        self.config_file = str(config_file) if config_file else None
        self.config = self._load_config()
    
    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from file, merged over the defaults."""
        default_config = copy.deepcopy(DEFAULT_CONFIG)
        
        if self.config_file is None:
            return default_config
        
        path = Path(self.config_file)
        if not path.exists():
            raise FileNotFoundError(f"Config file {self.config_file} not found")
        
        try:
            with open(path, 'r') as f:
                user_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {self.config_file} is not valid JSON: {e}") from e
        
        logger.info(f"Loaded configuration from {self.config_file}")
        return self._merge_configs(default_config, user_config)
    
    def _merge_configs(self, default: Dict[str, Any], user: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge user configuration with defaults."""
        merged = copy.deepcopy(default)
        
        for key, value in user.items():
            if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
                merged[key] = self._merge_configs(merged[key], value)
            else:
                merged[key] = value
        
        return merged
    
    def save_config(self, path: Optional[Union[str, Path]] = None) -> Path:
        """Save current configuration to file.
        
        Args:
            path: Destination; defaults to the file the config was loaded from
            
        Returns:
            Path written
        """
        target = Path(path or self.config_file or "config.json")
        target.parent.mkdir(parents=True, exist_ok=True)
        
        with open(target, 'w') as f:
            f.write(self.to_json())
        return target
    
    def to_json(self) -> str:
        """Serialize deterministically (sorted keys, trailing newline)."""
        return json.dumps(self.config, indent=2, sort_keys=True) + "\n"
    
    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by key (supports dot notation)."""
        keys = key.split('.')
        value = self.config
        
        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default
    
    def set(self, key: str, value: Any):
        """Set configuration value by key (supports dot notation)."""
        keys = key.split('.')
        config = self.config
        
        # Navigate to the parent of the target key
        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]
        
        config[keys[-1]] = value
