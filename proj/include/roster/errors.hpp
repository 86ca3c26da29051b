#pragma once
#include <stdexcept>
#include <string>

namespace roster {

// Base for everything the runtime throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValueError : Error { using Error::Error; };          // bad argument / invariant breach
struct StructureError : Error { using Error::Error; };      // malformed agent tree
struct RoutingError : Error { using Error::Error; };        // unknown bus recipient
struct ProtocolError : Error { using Error::Error; };       // message protocol misuse
struct TemplateError : Error { using Error::Error; };       // unresolved profile slot
struct BindingError : Error { using Error::Error; };        // execute_task called with unresolved bindings
struct DiffError : Error { using Error::Error; };           // diff application conflict
struct DiffInconsistent : Error { using Error::Error; };    // reasoner diff disagrees with structural differ
struct ScriptError : Error { using Error::Error; };         // script parse / malformed response
struct ScriptMismatch : Error { using Error::Error; };      // request does not match next script entry
struct ScriptExhausted : Error { using Error::Error; };     // script has no entries left
struct BackendError : Error { using Error::Error; };        // remote reasoner transport failure
struct MonitorError : Error { using Error::Error; };        // reasoner failure inside adjudication
struct ScenarioError : Error { using Error::Error; };       // scenario file parse / cross-reference failure

} // namespace roster
