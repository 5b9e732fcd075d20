"""Configure Django before collection so the rfim tests run under plain pytest."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'rfim_desk.settings')
django.setup()
