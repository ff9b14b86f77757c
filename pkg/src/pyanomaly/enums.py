"""Enumerators for pyanomaly."""
from enum import Enum


class OpKind(str, Enum):
    """Represent the operation that produced a graph node."""

    LEAF = "leaf"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    NEG = "neg"
    SCALE = "scale"
    MATMUL = "matmul"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    EXP = "exp"
    LOG = "log"
    SQUARE = "square"
    CONCAT = "concat"
    SLICE = "slice"
    RESHAPE = "reshape"
    TRANSPOSE = "transpose"
    SUM = "sum"
    MEAN = "mean"
    MSE = "mse"
    SOFTMAX = "softmax"
    CONV1D = "conv1d"


class ModelName(str, Enum):
    """Represent the names models are persisted under."""

    DARNN = "darnn"
    CNNLSTM = "cnnlstm"
    VAE = "vae"
    IFOREST = "iforest"


class Component(str, Enum):
    """Represent the components of the composite anomaly score."""

    R_HAT = "r_hat"
    S_ATT = "s_att"
    E_REC = "e_rec"
    I_ISO = "i_iso"


class Stage(str, Enum):
    """Represent the stages of an experiment run."""

    SIMULATE = "simulate"
    SPLIT = "split"
    TRAIN_DARNN = "train-darnn"
    TRAIN_CNNLSTM = "train-cnnlstm"
    TRAIN_VAE = "train-vae"
    TRAIN_IFOREST = "train-iforest"
    COMPONENTS = "components"
    GRID_SEARCH = "grid-search"
    SCORE = "score"
    REPORT = "report"
