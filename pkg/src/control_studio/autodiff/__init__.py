from .value import (
    Value,
    ShapeError,
    const,
    matmul,
    add,
    mul,
    scale,
    concat,
    stack_rows,
    tanh,
    sigmoid,
    relu,
    exp,
    softmax,
    sum_all,
    sum_axis,
    mse,
    repeat_rows,
    reshape,
    sliced,
    backward,
)
from .layers import (
    Param,
    init_projection,
    Linear,
    Embedding,
    Conv1dSame,
    BatchNormChannels,
    RecurrentLayer,
    recurrent_layers,
)
from .gradcheck import grad_check, GradCheckError
from .optim import Adam, clip_grad_norm
