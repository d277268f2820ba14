# Self-describing binary containers for weights and features
