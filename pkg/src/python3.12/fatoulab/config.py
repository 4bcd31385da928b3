#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
# SPDX-License-Identifier: BSD-3-Clause


from typing import ClassVar, Self
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


__all__: list[str] = ['Settings', 'SettingsModel']


class SettingsModel(BaseSettings):
    DEBUG     : bool  = False
    LOG_LEVEL : str   = 'INFO'

    # FATOULAB_THREADS is the documented knob for trial parallelism.
    THREADS   : int   = Field(default=1, ge=1)

    DEGREE    : int   = Field(default=8, ge=1)
    PERIOD    : int   = Field(default=10, ge=1)
    GAP       : float = Field(default=0.05, gt=0)
    EPS_ABS   : float = Field(default=1e-3, gt=0)
    RADIUS    : float = Field(default=10.0, gt=0)
    STEPS     : int   = Field(default=10_000, ge=0)
    GRID      : int   = Field(default=33, ge=2)
    DIAMETERS : int   = Field(default=3, ge=1)
    STRIDE    : int   = Field(default=50, ge=1)
    CAUCHY_TOL: float = Field(default=1e-6, gt=0)
    LEVEL_TOL : float = Field(default=1e-4, gt=0)
    RANK_TOL  : float = Field(default=1e-3, gt=0)
    INDEX_CAP : int   = Field(default=60, ge=1)
    MAX_ITERS : int   = Field(default=10_000, ge=1)
    BLOCK     : int   = Field(default=1024, ge=1)

    model_config = SettingsConfigDict(
        env_prefix = 'FATOULAB_',
        env_file   = '.env'
    )


class Settings:
    __singleton__: ClassVar[SettingsModel]

    def __new__(cls: type[Self]) -> SettingsModel:
        if not hasattr(cls, '__singleton__') or not cls.__singleton__:
            cls.__singleton__ = SettingsModel()
        return cls.__singleton__

    @classmethod
    def reload(cls: type[Self]) -> SettingsModel:
        cls.__singleton__ = SettingsModel()
        return cls.__singleton__
