"""Opcode and node-kind numbering shared by the compilers and both kernel backends."""

OP_CONST = 0
OP_VAR = 1
OP_NEG = 2
OP_NOT = 3
OP_ADD = 4
OP_SUB = 5
OP_MUL = 6
OP_EQ = 7
OP_NE = 8
OP_LT = 9
OP_LE = 10
OP_GT = 11
OP_GE = 12
OP_AND = 13
OP_OR = 14

BINARY_OPCODES = {
    "+": OP_ADD,
    "-": OP_SUB,
    "*": OP_MUL,
    "=": OP_EQ,
    "!=": OP_NE,
    "<": OP_LT,
    "<=": OP_LE,
    ">": OP_GT,
    ">=": OP_GE,
    "&": OP_AND,
    "|": OP_OR,
}

CMP_CODES = {"=": OP_EQ, "!=": OP_NE, "<": OP_LT, "<=": OP_LE, ">": OP_GT, ">=": OP_GE}

# property node kinds
P_CONST = 0
P_ATOM = 1
P_NOT = 2
P_AND = 3
P_OR = 4
P_NEXT = 5
P_FINALLY = 6
P_GLOBALLY = 7
P_UNTIL = 8

STATUS_OK = 0
STATUS_RANGE = 1
