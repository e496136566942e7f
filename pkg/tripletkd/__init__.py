"""tripletkd: teacher-student knowledge distillation with triplet, relational and metric losses."""

__version__ = "0.1.0"
