from tripletkd.train.optim import lr_at_epoch, sgd_step
from tripletkd.train.trainer import TrainResult, distill_student, evaluate_accuracy, train_teacher

__all__ = [
    "TrainResult",
    "distill_student",
    "evaluate_accuracy",
    "lr_at_epoch",
    "sgd_step",
    "train_teacher",
]
