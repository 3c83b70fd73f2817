"""Tour of the tape-based autodiff core.

Builds a tiny computation, walks the gradient back through it, and runs
the built-in finite-difference checker on a composite function.
"""
import numpy as np

import distillforge.tensor as tc


def main():
    # gradients only flow inside an active tape
    w = tc.Tensor(np.array([[0.5, -1.0], [2.0, 0.0]]), requires_grad=True)
    x = np.array([[1.0, 3.0]])

    with tc.Tape():
        h = tc.relu(tc.matmul(x, w))       # (1, 2)
        loss = tc.tsum(tc.mul(h, h))       # scalar
        tc.backward(loss)

    print("forward value :", loss.item())
    print("dloss/dw      :")
    print(w.grad)

    # the same graph evaluated outside a tape records nothing
    out = tc.relu(tc.matmul(x, w))
    print("outside a tape, requires_grad stays on but nothing is recorded:", out.grad)

    # numeric cross-check of a composite: softmax -> log -> sum
    def f(t):
        return tc.tsum(tc.log(tc.clamp_min(tc.softmax_rows(t), 1e-12)))

    result = tc.grad_check(f, np.random.default_rng(0).normal(size=(3, 4)))
    print(f"grad_check passed={result.passed} max_rel_error={result.max_rel_error:.2e}")


if __name__ == "__main__":
    main()
