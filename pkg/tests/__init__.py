# interimcore tests
