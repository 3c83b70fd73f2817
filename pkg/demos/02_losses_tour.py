"""Every training objective on small hand-sized inputs.

Shows how the temperature flattens soft predictions, how each combined
objective reduces to its plain task loss when the distillation weights
are zero, and what the triplet hinge looks like either side of its margin.
"""
import numpy as np

from distillforge.losses import (DistillConfig, alignment_distill_loss,
                                 classification_distill_loss, cross_entropy,
                                 euclidean_loss, soft_predictions, softmax_loss,
                                 triplet_loss)


def main():
    logits = np.array([[3.0, 0.0, -1.0]])
    for tau in (1.0, 3.0, 10.0):
        print(f"soft_predictions(tau={tau:>4}):", np.round(soft_predictions(logits, tau).data, 4))
    print("higher temperature -> flatter distribution, same argmax\n")

    labels = np.array([0])
    teacher = np.array([[5.0, 1.0, -2.0]])
    cfg = DistillConfig(alpha=1.0, tau=3.0)
    hard = softmax_loss(logits, labels).item()
    combined = classification_distill_loss(logits, teacher, labels, cfg).item()
    off = classification_distill_loss(logits, teacher, labels, DistillConfig(alpha=0.0)).item()
    print(f"hard-label loss          : {hard:.6f}")
    print(f"+ soft teacher term      : {combined:.6f}")
    print(f"alpha=0 reduction        : {off:.6f}  (equals the hard loss bitwise: {off == hard})\n")

    # regression with optional distillation terms
    student = (logits, np.array([[1.0, 2.0]]), np.array([[0.5, 0.5]]))
    teacher_out = (teacher, np.array([[1.5, 2.5]]))
    targets = np.array([[1.0, 0.0]])
    plain = euclidean_loss(student[2], targets).item()
    for alpha, beta in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        value = alignment_distill_loss(student, teacher_out, targets,
                                       DistillConfig(alpha=alpha, beta=beta)).item()
        print(f"alignment loss (alpha={alpha:g}, beta={beta:g}): {value:.6f}")
    print(f"plain squared error      : {plain:.6f}\n")

    a, p = np.array([[0.0, 0.0]]), np.array([[2.0, 0.0]])
    for n, note in ((np.array([[1.0, 0.0]]), "negative too close -> active hinge"),
                    (np.array([[9.0, 0.0]]), "negative far away  -> zero loss")):
        print(f"triplet_loss = {triplet_loss(a, p, n, 0.4).item():.1f}   ({note})")

    uniform = np.full((1, 5), 0.2)
    print(f"\ncross-entropy of a uniform guess over 5 classes: {cross_entropy(uniform, uniform).item():.6f}"
          f" (= ln 5 = {np.log(5):.6f})")


if __name__ == "__main__":
    main()
