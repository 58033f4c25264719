from django.apps import AppConfig


class SdnsecConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'sdnsec'
    verbose_name = 'SDNsec forwarding accountability'
