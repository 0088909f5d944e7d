from django.apps import AppConfig


class ScenariosAppConfig(AppConfig):
    name = 'kinbarrier.scenarios'
    verbose_name = "Scenarios"
