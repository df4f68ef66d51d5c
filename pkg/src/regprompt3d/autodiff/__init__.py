from .gradcheck import GradCheckReport, finite_diff_check, numerical_gradient, relative_error
from .optim import Adam, OptimizerState, SGDCosine, cosine_lr, sgd_cosine_step
from .tensor import (
    Graph,
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    broadcast_rows,
    clamp_min,
    concat,
    cross_entropy,
    div,
    exp,
    gelu,
    getitem,
    is_grad_enabled,
    l2_normalize,
    layer_norm,
    log,
    log_softmax,
    matmul,
    max_,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    softmax,
    splice,
    stack,
    sub,
    sum_,
    swapaxes,
    topological_order,
    transpose,
)
