"""Transfer to keypoint alignment, then pick distillation targets by probing.

Workflow:

1. train a classification teacher and continue it on keypoint regression;
2. build a student initialized from classification distillation;
3. fine-tune that student on regression three times -- no extra target,
   soft-prediction target only, hidden-embedding target only;
4. hand the three scores to select_targets and report its decision.

This is the same probe-then-decide loop the full experiment grid runs,
shrunk to seconds.
"""
from distillforge.data import GeneratorParams, generate
from distillforge.losses import DistillConfig
from distillforge.nets import NetworkSpec
from distillforge.pipeline import (ALIGNMENT, StageConfig, distill_student_cls,
                                   distill_student_task, evaluate_alignment,
                                   init_student_cls, select_targets,
                                   train_teacher_cls, train_teacher_task)


def main():
    data = generate(GeneratorParams(num_identities=12, samples_per_identity=30,
                                    input_dim=32, num_keypoints=5, seed=3))
    spec = NetworkSpec(input_dim=32, hidden_widths=(96, 48), embedding_dim=12,
                       num_classes=12, num_keypoint_coords=10)
    cfg = DistillConfig(tau=3.0)

    def stage(epochs, lr, seed):
        return StageConfig(batch_size=32, lr_schedule=((lr, epochs),), seed=seed)

    teacher_cls = train_teacher_cls(
        spec, data, StageConfig(32, ((0.02, 8), (0.002, 8)), seed=1))
    teacher_align = train_teacher_task(teacher_cls, ALIGNMENT, data, cfg, stage(10, 0.001, 2))
    print(f"teacher nrmse after transfer: {evaluate_alignment(teacher_align, data.test)['nrmse']:.4f}")

    # student arrives via the classification path, then moves to the new task
    student0 = init_student_cls(spec.student(4), data, StageConfig(32, ((0.02, 8), (0.002, 8)), seed=3))
    student_cls = distill_student_cls(teacher_cls, data, cfg, stage(8, 0.002, 4), init_from=student0)

    probes = {}
    for alpha, beta in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        run_cfg = DistillConfig(alpha=alpha, beta=beta, tau=cfg.tau)
        tuned = distill_student_task(teacher_align, student_cls, ALIGNMENT, data,
                                     run_cfg, stage(10, 0.001, 5))
        probes[(alpha, beta)] = evaluate_alignment(tuned, data.test)["nrmse"]
        print(f"student /4 nrmse at (alpha={alpha:g}, beta={beta:g}): {probes[(alpha, beta)]:.4f}")

    alpha, beta = select_targets(probes, higher_is_better=False)
    names = {(0, 0): "neither target", (1, 0): "soft predictions only",
             (0, 1): "hidden embedding only", (1, 1): "both targets"}
    print(f"\nselected weighting: (alpha={alpha:g}, beta={beta:g}) -> {names[(alpha, beta)]}")

    if (alpha, beta) not in probes:  # e.g. both solo probes helped -> run the combination
        final = distill_student_task(teacher_align, student_cls, ALIGNMENT, data,
                                     DistillConfig(alpha=alpha, beta=beta, tau=cfg.tau),
                                     stage(10, 0.001, 5))
        print(f"student /4 nrmse at the selected weighting: "
              f"{evaluate_alignment(final, data.test)['nrmse']:.4f}")


if __name__ == "__main__":
    main()
