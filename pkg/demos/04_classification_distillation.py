"""Compressing a classifier with and without the full-initialization trick.

Trains a teacher, then builds quarter-width students three ways:

* hard labels only, from scratch;
* teacher's soft targets + hard labels, from scratch;
* the same combined objective, but started from a student already trained
  to convergence on hard labels (full initialization).

Small benchmark, so all three finish in a few seconds.
"""
from distillforge.data import GeneratorParams, generate
from distillforge.losses import DistillConfig
from distillforge.nets import NetworkSpec, num_parameters
from distillforge.pipeline import (StageConfig, distill_student_cls,
                                   evaluate_classification, init_student_cls,
                                   train_teacher_cls)


def main():
    # noisy enough that the quarter-width student cannot match the teacher
    data = generate(GeneratorParams(num_identities=24, samples_per_identity=20,
                                    input_dim=32, noise_std=0.5, seed=7))
    teacher_spec = NetworkSpec(input_dim=32, hidden_widths=(96, 48), embedding_dim=12,
                               num_classes=24, num_keypoint_coords=10)
    cfg = DistillConfig(alpha=1.0, tau=3.0)

    def stage(epochs, lr, seed):
        return StageConfig(batch_size=32, lr_schedule=((lr, epochs), (lr / 10, epochs)), seed=seed)

    teacher = train_teacher_cls(teacher_spec, data, stage(6, 0.02, seed=1))
    print(f"teacher top1          : {evaluate_classification(teacher, data.test)['top1']:.3f} "
          f"({num_parameters(teacher)} params)")

    student_spec = teacher_spec.student(4)
    hard_only = init_student_cls(student_spec, data, stage(6, 0.02, seed=2))
    print(f"student /4, hard only : {evaluate_classification(hard_only, data.test)['top1']:.3f} "
          f"({num_parameters(hard_only)} params)")

    scratch = distill_student_cls(teacher, data, cfg, stage(6, 0.02, seed=3),
                                  student_spec=student_spec)
    print(f"student /4, distilled from scratch   : "
          f"{evaluate_classification(scratch, data.test)['top1']:.3f}")

    # continue from the converged hard-label student at a tenth of the rate
    full_init = distill_student_cls(teacher, data, cfg,
                                    StageConfig(batch_size=32, lr_schedule=((0.002, 6),), seed=4),
                                    init_from=hard_only)
    print(f"student /4, distilled with full init : "
          f"{evaluate_classification(full_init, data.test)['top1']:.3f}")


if __name__ == "__main__":
    main()
