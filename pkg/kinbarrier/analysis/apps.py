from django.apps import AppConfig


class AnalysisAppConfig(AppConfig):
    name = 'kinbarrier.analysis'

    def ready(self):
        # make sure the checks are registered now
        import kinbarrier.analysis.functions  # noqa: F401
