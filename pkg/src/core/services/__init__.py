"""Сервисы лаборатории: меры, функции, осцилляции, мартингалы, ядра, эксперименты."""
