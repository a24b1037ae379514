from django.apps import AppConfig


class DualSolverConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dual_solver'
