"""Regenerate src/seqguard/data/seed_taxonomy.json in canonical form."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from seqguard.taxonomy import Taxonomy, TaxonomyEntry, TriggerSignature


def call(path):
    return TriggerSignature(module_path=path, call_only=True)


def ref(path):
    return TriggerSignature(module_path=path, call_only=False)


# (action, category, description, triggers)
SEED = [
    # File Operations
    ("basic_file_reading", "File Operations",
     "Open a local file for reading or writing", [call("open"), call("io.open")]),
    ("create_directory", "File Operations",
     "Create a directory on the local filesystem",
     [call("os.mkdir"), call("os.makedirs"), call("pathlib.Path.mkdir")]),
    ("copy_file", "File Operations",
     "Copy a file to another location",
     [call("shutil.copy"), call("shutil.copyfile"), call("shutil.copy2")]),
    ("delete_file", "File Operations",
     "Delete a file or directory tree",
     [call("os.remove"), call("os.unlink"), call("shutil.rmtree")]),
    ("path_string_operations", "File Operations",
     "Build or manipulate filesystem path strings", [call("os.path.*")]),
    ("list_directory", "File Operations",
     "Enumerate directory contents",
     [call("os.listdir"), call("os.walk"), call("os.scandir")]),
    ("set_file_permissions", "File Operations",
     "Change file permissions or ownership", [call("os.chmod"), call("os.chown")]),
    # Basic Network Ops
    ("create_http_connection", "Basic Network Ops",
     "Open an HTTP or HTTPS connection",
     [call("http.client.HTTPConnection"), call("http.client.HTTPSConnection"),
      call("urllib.request.urlopen")]),
    ("send_http_get", "Basic Network Ops",
     "Issue an HTTP GET request", [call("requests.get"), call("httpx.get")]),
    ("send_http_post", "Basic Network Ops",
     "Issue an HTTP POST request", [call("requests.post"), call("httpx.post")]),
    ("create_socket", "Basic Network Ops",
     "Create a raw network socket", [call("socket.socket")]),
    ("establish_tcp_connection", "Basic Network Ops",
     "Connect a socket to a remote endpoint",
     [call("socket.socket.connect"), call("socket.create_connection")]),
    ("send_socket_data", "Basic Network Ops",
     "Send bytes over a connected socket",
     [call("socket.socket.send"), call("socket.socket.sendall")]),
    ("receive_socket_data", "Basic Network Ops",
     "Receive bytes from a connected socket", [call("socket.socket.recv")]),
    ("resolve_hostname", "Basic Network Ops",
     "Resolve a hostname to an IP address", [call("socket.gethostbyname")]),
    # Network File Transfer
    ("download_file_url", "Network File Transfer",
     "Download a remote file to local storage",
     [call("urllib.request.urlretrieve"), call("wget.download")]),
    ("upload_file_transfer_sh", "Network File Transfer",
     "Upload a file to an anonymous file-sharing service", []),
    ("exfiltrate_folder", "Network File Transfer",
     "Archive and transmit a whole directory to a remote host", []),
    ("open_ftp_connection", "Network File Transfer",
     "Open an FTP session", [call("ftplib.FTP")]),
    ("send_email_smtp", "Network File Transfer",
     "Send email through an SMTP server",
     [call("smtplib.SMTP"), call("smtplib.SMTP_SSL")]),
    # Command & Control
    ("execute_shell_command", "Command & Control",
     "Execute a command through the system shell",
     [call("os.system"), call("os.popen"), call("subprocess.getoutput")]),
    ("spawn_process_shell", "Command & Control",
     "Replace or spawn a process attached to a terminal",
     [call("pty.spawn"), call("os.execv"), call("os.execvp")]),
    ("spawn_process_no_shell", "Command & Control",
     "Spawn a subprocess without a shell",
     [call("subprocess.run"), call("subprocess.Popen"),
      call("subprocess.check_call")]),
    ("decrypt_fernet_data", "Command & Control",
     "Decrypt Fernet-encrypted payload data",
     [call("cryptography.fernet.Fernet.decrypt")]),
    ("kill_process", "Command & Control",
     "Terminate another process by id",
     [call("os.kill"), call("psutil.Process.kill")]),
    # Third-party Platform Abuse
    ("create_discord_bot", "Third-party Platform Abuse",
     "Instantiate a Discord bot or client",
     [call("discord.Client"), call("discord.ext.commands.Bot")]),
    ("send_discord_message", "Third-party Platform Abuse",
     "Send a message through a Discord webhook",
     [call("discord.Webhook.send"), call("discord.SyncWebhook.send")]),
    ("check_roblox_cookie", "Third-party Platform Abuse",
     "Validate or harvest a Roblox session cookie", []),
    ("send_telegram_message", "Third-party Platform Abuse",
     "Send a message through the Telegram bot API",
     [call("telebot.TeleBot.send_message"), call("telegram.Bot.send_message")]),
    # Data Exfiltration
    ("init_evil_class", "Data Exfiltration",
     "Construct a class orchestrating data theft", []),
    ("init_grabber_class", "Data Exfiltration",
     "Construct a class harvesting credentials or tokens", []),
    ("init_sender_class", "Data Exfiltration",
     "Construct a class shipping stolen data to a collector", []),
    ("send_data_webhook", "Data Exfiltration",
     "Post collected data to an attacker-controlled webhook", []),
    # Code Execution
    ("exec_python_code", "Code Execution",
     "Execute dynamically supplied Python code", [call("exec"), call("eval")]),
    ("import_dynamic", "Code Execution",
     "Import a module whose name is computed at runtime",
     [call("importlib.import_module"), call("__import__")]),
    ("compile_code_object", "Code Execution",
     "Compile source text into a code object", [call("compile")]),
    ("load_pickle_data", "Code Execution",
     "Deserialize pickle or marshal data, executing embedded constructors",
     [call("pickle.load"), call("pickle.loads"), call("marshal.loads")]),
    # Info Gathering
    ("get_env_var", "Info Gathering",
     "Read process environment variables",
     [call("os.getenv"), ref("os.environ")]),
    ("get_os_info", "Info Gathering",
     "Collect operating system and platform details",
     [call("platform.system"), call("platform.platform"), call("os.uname")]),
    ("get_hostname", "Info Gathering",
     "Read the local machine hostname",
     [call("socket.gethostname"), call("platform.node")]),
    ("get_username", "Info Gathering",
     "Read the current user name",
     [call("getpass.getuser"), call("os.getlogin")]),
    ("get_chrome_passwords", "Info Gathering",
     "Extract saved passwords from a Chrome profile", []),
    ("capture_screen_region", "Info Gathering",
     "Capture a screenshot of the display",
     [call("PIL.ImageGrab.grab"), call("pyautogui.screenshot")]),
    ("get_clipboard_text", "Info Gathering",
     "Read the system clipboard",
     [call("pyperclip.paste"), call("win32clipboard.GetClipboardData")]),
    ("copy_to_clipboard", "Info Gathering",
     "Write text to the system clipboard",
     [call("pyperclip.copy"), call("win32clipboard.SetClipboardData")]),
    # Encryption/Hashing
    ("generate_aes_cipher", "Encryption/Hashing",
     "Construct an AES cipher object",
     [call("Crypto.Cipher.AES.new"),
      call("cryptography.hazmat.primitives.ciphers.Cipher")]),
    ("decrypt_aes_data", "Encryption/Hashing",
     "Decrypt data with an AES cipher", [call("Crypto.Cipher.AES.new.decrypt")]),
    ("create_md5_hash", "Encryption/Hashing",
     "Compute an MD5 digest", [call("hashlib.md5")]),
    ("create_sha_hash", "Encryption/Hashing",
     "Compute a SHA-family digest",
     [call("hashlib.sha1"), call("hashlib.sha256"), call("hashlib.sha512")]),
    ("generate_fernet_cipher", "Encryption/Hashing",
     "Construct a Fernet cipher object", [call("cryptography.fernet.Fernet")]),
    # System Operations
    ("create_child_process", "System Operations",
     "Fork or start a child worker process",
     [call("os.fork"), call("multiprocessing.Process")]),
    ("create_thread", "System Operations",
     "Start a new thread", [call("threading.Thread")]),
    ("set_registry_value", "System Operations",
     "Write a Windows registry value",
     [call("winreg.SetValueEx"), call("winreg.CreateKey")]),
    ("dup_socket_stdin", "System Operations",
     "Redirect standard input onto another file descriptor", [call("os.dup2")]),
    ("dup_socket_stdout", "System Operations",
     "Redirect standard output onto another file descriptor", [call("os.dup2")]),
    ("dup_socket_stderr", "System Operations",
     "Redirect standard error onto another file descriptor", [call("os.dup2")]),
    ("exit_program", "System Operations",
     "Terminate the current process", [call("sys.exit"), call("os._exit")]),
    ("sleep_delay", "System Operations",
     "Pause execution for a fixed delay", [call("time.sleep")]),
    ("read_process_stdout", "System Operations",
     "Read output produced by a child process",
     [call("subprocess.check_output"), call("subprocess.Popen.communicate"),
      call("subprocess.run.stdout")]),
    ("change_working_dir", "System Operations",
     "Change the process working directory", [call("os.chdir")]),
    # Data Transformation
    ("decode_base64_to_bytes", "Data Transformation",
     "Decode base64 or base85 text into bytes",
     [call("base64.b64decode"), call("base64.b85decode"),
      call("base64.b32decode")]),
    ("encode_base64", "Data Transformation",
     "Encode bytes as base64 text", [call("base64.b64encode")]),
    ("serialize_to_json", "Data Transformation",
     "Serialize an object to JSON text", [call("json.dumps"), call("json.dump")]),
    ("parse_json_data", "Data Transformation",
     "Parse JSON text into objects", [call("json.loads"), call("json.load")]),
    ("convert_int_to_char", "Data Transformation",
     "Convert integer code points into characters", [call("chr")]),
    ("compress_data", "Data Transformation",
     "Compress or decompress a byte payload",
     [call("zlib.compress"), call("zlib.decompress"), call("lzma.decompress"),
      call("bz2.decompress")]),
    ("encode_url_params", "Data Transformation",
     "Encode parameters into a URL query string",
     [call("urllib.parse.urlencode")]),
    ("reverse_string_data", "Data Transformation",
     "Reverse a string, typically to deobfuscate a payload", []),
    # Persistence/Stealth
    ("check_persistence_entry", "Persistence/Stealth",
     "Inspect autostart locations for an installed persistence entry", []),
    ("open_sqlite_db", "Persistence/Stealth",
     "Open a local SQLite database", [call("sqlite3.connect")]),
    ("disable_ssl_warnings", "Persistence/Stealth",
     "Suppress TLS certificate verification or warnings",
     [call("urllib3.disable_warnings"), call("ssl._create_unverified_context")]),
    ("add_startup_entry", "Persistence/Stealth",
     "Register a program to run at system startup", []),
    ("hide_console_window", "Persistence/Stealth",
     "Hide the console window of the running process",
     [call("ctypes.windll.user32.ShowWindow")]),
    ("write_crontab_entry", "Persistence/Stealth",
     "Install a cron job for scheduled execution", [call("crontab.CronTab")]),
]


def main():
    entries = [
        TaxonomyEntry(action=a, category=c, description=d, triggers=tuple(t))
        for a, c, d, t in SEED
    ]
    taxonomy = Taxonomy(entries)
    out = pathlib.Path(__file__).resolve().parents[1] / "src/seqguard/data/seed_taxonomy.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(taxonomy.to_json(), encoding="utf-8")
    categories = {e.category for e in entries}
    print(f"wrote {out} with {len(entries)} actions, {len(categories)} categories")


if __name__ == "__main__":
    main()
