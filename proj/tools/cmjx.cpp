#include "cmjx/cli.hpp"

int main(int argc, char** argv)
{
    return cmjx::cli::main(argc, argv);
}
