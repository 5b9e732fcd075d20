from django.apps import AppConfig


class RfimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rfim'
    verbose_name = 'Random-field Ising toolkit'
